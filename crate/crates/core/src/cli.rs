//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::estimates::{
    compute_k, default_grid, log_grid, random_support_data, trial_rng, verify, verify_base_case, BaseCaseReport,
    LiYauReport, Trial, Verdict,
};
use crate::export;
use crate::group::{validate_spec, Group, GroupSpec};
use crate::heat::{heat_kernel_scaled, quotient_heat_solve, DEFAULT_MAX_POINTS};
use crate::quotient::{assemble_eigenbasis, EigenBasis, QuotientGraph};
use crate::specs;
use crate::synthesis::{make_plan, periodize, pos_comb_check, synthesize, KernelCache};

#[derive(Parser, Debug)]
#[command(name = "cayley-heat", version, about = "Heat kernels and Li-Yau estimates on virtually Abelian Cayley graphs")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a group spec and list every violation.
    Validate(SpecArg),
    /// Block spectra of quotients, with the β ≥ 1/K check.
    Spectrum(SpectrumArgs),
    /// Periodize, synthesize, calibrate and certify the Li-Yau bounds.
    Verify(VerifyArgs),
    /// Dump the Abelian heat kernel on a ball.
    Kernel(KernelArgs),
    /// Dump word decompositions of S̃ over S and the constant K.
    Words(WordsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpecArg {
    /// Spec file, or a bundled name: hexagonal, klein-bottle, Z^d.
    #[arg(long, default_value = "hexagonal")]
    pub spec: String,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    /// Moduli: `4`, `2,4,6` or `2..8`.
    #[arg(long, default_value = "2..8", value_parser = parse_moduli)]
    pub n: Moduli,
    /// Override K.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    /// Moduli; the log constant is compared between the first and last.
    #[arg(long, default_value = "6,8", value_parser = parse_moduli)]
    pub n: Moduli,
    #[arg(long, default_value_t = 0.05)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 40)]
    pub t_points: usize,
    /// Kernel truncation tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Threshold for the main inequality (default |S̃|).
    #[arg(long)]
    pub c_target: Option<f64>,
    /// Override K.
    #[arg(long)]
    pub k: Option<f64>,
    /// Radius of the ball carrying the random initial data.
    #[arg(long, default_value_t = 2)]
    pub support_radius: usize,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Time multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
    pub max_points: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WordsArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Moduli(pub Vec<usize>);

fn parse_moduli(s: &str) -> Result<Moduli, String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad modulus {x:?}: {e}"));
    let ns = if let Some((a, b)) = s.split_once("..") {
        (parse(a)?..=parse(b)?).collect()
    } else {
        s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
    };
    if ns.is_empty() {
        return Err("no moduli given".into());
    }
    if let Some(n) = ns.iter().find(|&&n| n < 2) {
        return Err(format!("modulus must be at least 2, got {n}"));
    }
    Ok(Moduli(ns))
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and failed (exit 1).
    Check(String),
    /// Bad input or I/O (exit 2).
    Usage(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("I/O error: {e}"))
    }
}

fn check<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Check(e.to_string())
}

/// Load a spec from a file path or a bundled name.
pub fn load_spec(arg: &str) -> Result<GroupSpec, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {arg}: {e}")))?;
        return GroupSpec::from_json(&text).map_err(|e| Failure::Usage(format!("cannot parse {arg}: {e}")));
    }
    specs::by_name(arg).ok_or_else(|| Failure::Usage(format!("no such file or bundled spec: {arg}")))
}

fn load_group(arg: &str) -> Result<Group, Failure> {
    Group::new(load_spec(arg)?).map_err(check)
}

/// Parse `args` and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Spectrum(a) => cmd_spectrum(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout).map(|_| ()),
        Command::Kernel(a) => cmd_kernel(a, stdout),
        Command::Words(a) => cmd_words(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Check(m) => eprintln!("check failed: {m}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

pub fn cmd_validate(a: &SpecArg, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = load_spec(&a.spec)?;
    let violations = validate_spec(&spec);
    if violations.is_empty() {
        writeln!(out, "{}: valid (d={}, |F|={}, |S|={}, |S̃|={})", spec.name, spec.d, spec.f_table.len(), spec.s.len(), spec.s_tilde.len())?;
        return Ok(());
    }
    for v in &violations {
        writeln!(out, "violation: {v}")?;
    }
    Err(Failure::Check(format!("{} violation(s) in {}", violations.len(), spec.name)))
}

fn k_value(group: &Group, k: Option<f64>) -> Result<f64, Failure> {
    match k {
        Some(k) => Ok(k),
        None => Ok(compute_k(group).map_err(check)?.k),
    }
}

pub fn cmd_spectrum(a: &SpectrumArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let group = load_group(&a.spec.spec)?;
    let k = k_value(&group, a.k)?;
    let bases: Vec<EigenBasis> = a
        .n
        .0
        .par_iter()
        .map(|&n| {
            let q = QuotientGraph::new(&group, n).map_err(check)?;
            assemble_eigenbasis(&q).map_err(check)
        })
        .collect::<Result<_, _>>()?;
    let path = a.out.join("spectrum.csv");
    export::to_file(&path, |w| export::write_spectrum(w, &bases.iter().collect::<Vec<_>>()))?;
    let mut failed = Vec::new();
    for b in &bases {
        let min_beta = b.min_beta().unwrap_or(f64::INFINITY);
        let ok = min_beta >= 1.0 / k;
        writeln!(
            out,
            "n={} functions={} gram_residual={:e} eigen_residual={:e} min_beta={} 1/K={} {}",
            b.quotient.n(),
            b.functions.len(),
            b.gram_residual,
            b.eigen_residual,
            min_beta,
            1.0 / k,
            if ok { "ok" } else { "FAIL" }
        )?;
        if !ok {
            failed.push(b.quotient.n());
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("β < 1/K for n in {failed:?}")))
    }
}

pub fn cmd_kernel(a: &KernelArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let group = load_group(&a.spec.spec)?;
    if !(a.beta > 0.0) {
        return Err(Failure::Usage(format!("beta must be positive, got {}", a.beta)));
    }
    let state = heat_kernel_scaled(&group, a.beta, a.t, a.eps, a.max_points).map_err(|e| Failure::Usage(e.to_string()))?;
    export::to_file(&a.out.join("kernel.csv"), |w| export::write_kernel_csv(w, &state))?;
    export::to_file(&a.out.join("kernel.json"), |w| export::write_kernel_sidecar(w, group.name(), &state))?;
    writeln!(
        out,
        "t={} beta={} radius={} points={} mass={} tail_bound={:e}",
        a.t,
        a.beta,
        state.radius(),
        state.values.len(),
        state.mass(),
        state.tail_bound
    )?;
    Ok(())
}

pub fn cmd_words(a: &WordsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let group = load_group(&a.spec.spec)?;
    let w = compute_k(&group).map_err(check)?;
    for word in &w.decomposition.words {
        let letters: Vec<String> = word.letters.iter().map(|&i| group.s()[i].to_string()).collect();
        writeln!(out, "{} = {}", word.target, letters.join(" * "))?;
    }
    writeln!(out, "r={} M={} K={} max_letter={}", w.r, w.m, w.k, w.max_letter)?;
    export::to_file(&a.out.join("words.json"), |f| export::write_json(f, &w))?;
    Ok(())
}

/// Times at which synthesis is compared with the spectral solution.
pub const CROSS_CHECK_TIMES: [f64; 3] = [0.3, 1.0, 3.0];
/// Tolerance at `t = 0` and for `t > 0`.
pub const EXACT_TOL: f64 = 1e-8;
pub const EVOLUTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisCheck {
    pub initial_error: f64,
    pub initial_tolerance: f64,
    pub evolution_error: f64,
    pub evolution_tolerance: f64,
    pub truncation_bound: f64,
    pub pos_comb_residual: f64,
    pub min_q: f64,
    pub max_b_excess: f64,
    pub min_slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodizationSummary {
    pub certified: usize,
    pub trials: usize,
    pub max_norm_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRun {
    pub n: usize,
    pub min_beta: f64,
    pub beta_bound_ok: bool,
    pub periodization: PeriodizationSummary,
    pub synthesis: SynthesisCheck,
    pub report: LiYauReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogStability {
    pub n_first: usize,
    pub n_last: usize,
    pub c_first: f64,
    pub c_last: f64,
    pub relative_change: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessProbe {
    pub target_fraction: f64,
    pub exceeded: Vec<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifySummary {
    pub group: String,
    pub seed: u64,
    pub rng: &'static str,
    pub trials: usize,
    pub eps: f64,
    pub grid: Vec<f64>,
    pub k: f64,
    pub k_computed: f64,
    pub shift_factor: usize,
    pub c_target: f64,
    pub base_case: BaseCaseReport,
    pub tightness_probe: TightnessProbe,
    pub runs: Vec<ModulusRun>,
    pub log_stability: Option<LogStability>,
    pub passed: bool,
    pub failures: Vec<String>,
}

fn trials_for(group: &Group, q: &QuotientGraph, cfg: &VerifyArgs) -> Result<(Vec<Trial>, PeriodizationSummary), Failure> {
    let k = q.k() as f64;
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut certified = 0;
    let mut max_ratio = 0.0f64;
    for i in 0..cfg.trials {
        let data: BTreeMap<_, _> = random_support_data(group, cfg.support_radius, &mut trial_rng(cfg.seed, i));
        let p = periodize(q, &data).map_err(check)?;
        certified += usize::from(p.norm_certified);
        if p.restricted_norm > 0.0 {
            max_ratio = max_ratio.max(p.norm / p.restricted_norm);
        }
        let norm = data.values().map(|v| v * v).sum::<f64>().sqrt();
        trials.push(Trial { values: p.values, shift: k * norm });
    }
    Ok((trials, PeriodizationSummary { certified, trials: cfg.trials, max_norm_ratio: max_ratio }))
}

/// Cross-check synthesis against the spectral solution for every trial.
pub fn synthesis_cross_check(basis: &EigenBasis, trials: &[Trial], eps: f64) -> Result<SynthesisCheck, Failure> {
    let group = basis.quotient.group().clone();
    let plans = trials
        .iter()
        .map(|t| make_plan(basis, &t.values).map_err(check))
        .collect::<Result<Vec<_>, _>>()?;
    let mut initial_error = 0.0f64;
    let mut evolution_error = 0.0f64;
    let mut truncation_bound = 0.0f64;
    let mut pos_comb_residual = 0.0f64;
    let mut betas: Vec<f64> = plans.iter().flat_map(|p| p.terms.iter().map(|t| t.beta)).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    for t in std::iter::once(0.0).chain(CROSS_CHECK_TIMES) {
        let mut cache = KernelCache::new(&group, t, eps);
        cache.prefill(&basis.quotient, &betas).map_err(check)?;
        for (trial, plan) in trials.iter().zip(&plans) {
            let u = synthesize(basis, plan, &mut cache).map_err(check)?;
            let exact = if t == 0.0 { trial.values.clone() } else { quotient_heat_solve(basis, &trial.values, t) };
            let err = u.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            truncation_bound = truncation_bound.max(u.error_bound);
            if t == 0.0 {
                initial_error = initial_error.max(err);
            } else {
                evolution_error = evolution_error.max(err);
                let r = pos_comb_check(basis, plan, &exact, &mut cache, EVOLUTION_TOL).map_err(check)?;
                pos_comb_residual = pos_comb_residual.max(r.residual);
            }
        }
    }
    let min_q = plans.iter().map(|p| p.min_q()).fold(f64::INFINITY, f64::min);
    let max_b_excess = plans.iter().map(|p| p.b.re - p.b_bound).fold(f64::NEG_INFINITY, f64::max);
    let min_slack = plans.iter().map(|p| p.slack()).fold(f64::INFINITY, f64::min);
    let passed = initial_error <= EXACT_TOL
        && evolution_error <= EVOLUTION_TOL
        && (plans.is_empty() || (min_q >= 0.0 && max_b_excess <= 1e-12));
    Ok(SynthesisCheck {
        initial_error,
        initial_tolerance: EXACT_TOL,
        evolution_error,
        evolution_tolerance: EVOLUTION_TOL,
        truncation_bound,
        pos_comb_residual,
        min_q: if plans.is_empty() { 0.0 } else { min_q },
        max_b_excess: if plans.is_empty() { 0.0 } else { max_b_excess },
        min_slack: if plans.is_empty() { 0.0 } else { min_slack },
        passed,
    })
}

/// Allowed relative change of the empirical log constant between moduli.
pub const LOG_STABILITY_TOL: f64 = 0.10;

/// Run the full pipeline and write the reports. Failed checks are listed in
/// [`VerifySummary::failures`]; errors are reserved for inputs the pipeline
/// cannot process.
pub fn run_verify(cfg: &VerifyArgs, out: &mut dyn Write) -> Result<VerifySummary, Failure> {
    let group = load_group(&cfg.spec.spec)?;
    if cfg.t_points == 0 || !(cfg.t_min > 0.0 && cfg.t_max >= cfg.t_min) {
        return Err(Failure::Usage("need 0 < t-min ≤ t-max and t-points ≥ 1".into()));
    }
    if let Some(n) = cfg.n.0.iter().find(|&&n| n < 4) {
        return Err(Failure::Usage(format!("verify needs n ≥ 4 for periodization, got {n}")));
    }
    let grid = if (cfg.t_min, cfg.t_max, cfg.t_points) == (0.05, 10.0, 40) {
        default_grid()
    } else {
        log_grid(cfg.t_min, cfg.t_max, cfg.t_points)
    };
    let k_computed = compute_k(&group).map_err(check)?.k;
    let k = cfg.k.unwrap_or(k_computed);
    let s_tilde = group.s_tilde().len() as f64;
    let c_target = cfg.c_target.unwrap_or(s_tilde);

    let base_case = verify_base_case(cfg.trials, &grid, cfg.seed).map_err(check)?;
    let tightness_probe = TightnessProbe {
        target_fraction: 0.25,
        exceeded: base_case.tori.iter().map(|t| t.sup > t.bound / 4.0).collect(),
    };
    let calibrated = base_case.passed;

    let mut runs = Vec::new();
    for &n in &cfg.n.0 {
        let q = QuotientGraph::new(&group, n).map_err(check)?;
        let basis = assemble_eigenbasis(&q).map_err(check)?;
        let min_beta = basis.min_beta().unwrap_or(f64::INFINITY);
        let (trials, periodization) = trials_for(&group, &q, cfg)?;
        let synthesis = synthesis_cross_check(&basis, &trials, cfg.eps)?;
        let report = verify(&basis, &trials, &grid, k, Some(c_target), None, calibrated).map_err(check)?;
        export::to_file(&cfg.out.join(format!("liyau_n{n}.csv")), |w| export::write_report_detail(w, &report))?;
        if let Some(first) = trials.first() {
            let plan = make_plan(&basis, &first.values).map_err(check)?;
            export::to_file(&cfg.out.join(format!("plan_n{n}_trial0.json")), |w| export::write_json(w, &plan))?;
        }
        runs.push(ModulusRun { n, min_beta, beta_bound_ok: min_beta >= 1.0 / k, periodization, synthesis, report });
    }
    let log_stability = match (runs.first(), runs.last()) {
        (Some(a), Some(b)) if runs.len() > 1 => {
            let rel = (b.report.c_emp_log - a.report.c_emp_log).abs() / a.report.c_emp_log.abs().max(f64::MIN_POSITIVE);
            Some(LogStability {
                n_first: a.n,
                n_last: b.n,
                c_first: a.report.c_emp_log,
                c_last: b.report.c_emp_log,
                relative_change: rel,
                tolerance: LOG_STABILITY_TOL,
                passed: rel <= LOG_STABILITY_TOL || (a.report.c_emp_log == 0.0 && b.report.c_emp_log == 0.0),
            })
        }
        _ => None,
    };
    let mut failures = Vec::new();
    if !calibrated {
        failures.push("base-case calibration".to_string());
    }
    for r in &runs {
        if !r.beta_bound_ok {
            failures.push(format!("β ≥ 1/K at n={}", r.n));
        }
        if !r.synthesis.passed {
            failures.push(format!("synthesis cross-check at n={}", r.n));
        }
        if r.report.main_verdict == Verdict::Fail {
            failures.push(format!("main inequality at n={}", r.n));
        }
        if !r.report.c_emp_log.is_finite() {
            failures.push(format!("log constant not finite at n={}", r.n));
        }
    }
    if log_stability.as_ref().is_some_and(|s| !s.passed) {
        failures.push("log constant stability".into());
    }
    let summary = VerifySummary {
        group: group.name().to_string(),
        seed: cfg.seed,
        rng: "ChaCha8, one stream per trial",
        trials: cfg.trials,
        eps: cfg.eps,
        grid,
        k,
        k_computed,
        shift_factor: group.f_order(),
        c_target,
        base_case,
        tightness_probe,
        runs,
        log_stability,
        passed: failures.is_empty(),
        failures,
    };
    export::to_file(&cfg.out.join("verify_summary.json"), |w| export::write_json(w, &summary))?;
    for t in &summary.base_case.tori {
        writeln!(out, "base case (Z/{})^{}: sup t·lhs = {} (bound {}) {}", t.n, t.d, t.sup, t.bound, pass(t.passed))?;
    }
    for r in &summary.runs {
        writeln!(
            out,
            "n={}: sup t·lhs_main = {} (C={}, K={}) {:?}; sup t·lhs_log = {}; synthesis error {:e} {}",
            r.n,
            r.report.c_emp_main,
            c_target,
            k,
            r.report.main_verdict,
            r.report.c_emp_log,
            r.synthesis.evolution_error,
            pass(r.synthesis.passed)
        )?;
    }
    if let Some(s) = &summary.log_stability {
        writeln!(out, "log constant n={}→{}: change {:.4} {}", s.n_first, s.n_last, s.relative_change, pass(s.passed))?;
    }
    writeln!(out, "reports in {}", cfg.out.display())?;
    Ok(summary)
}

/// [`run_verify`], failing if any asserted check failed.
pub fn cmd_verify(cfg: &VerifyArgs, out: &mut dyn Write) -> Result<VerifySummary, Failure> {
    let summary = run_verify(cfg, out)?;
    if summary.passed {
        Ok(summary)
    } else {
        Err(Failure::Check(summary.failures.join(", ")))
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
