//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use cayley_heat::cli::{run_verify, Moduli, SpecArg, VerifyArgs, VerifySummary};
use cayley_heat::estimates::{compute_k, convexity_check, random_balanced, trial_rng, Verdict};
use cayley_heat::graph::GraphView;
use cayley_heat::heat::{evolve_full, heat_kernel_ball, quotient_heat_solve};
use cayley_heat::quotient::{assemble_eigenbasis, EigenBasis};
use cayley_heat::synthesis::{make_plan, periodize, pos_comb_check, synthesize, KernelCache};
use cayley_heat::{specs, BallFunction, Element, Generators, Group, QuotientGraph};
use common::{bessel_i, lattice_kernel, RandomField};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn hex() -> Group {
    Group::new(specs::hexagonal()).unwrap()
}

fn bases(group: &Group, ns: impl IntoIterator<Item = usize>) -> Vec<EigenBasis> {
    ns.into_iter()
        .map(|n| assemble_eigenbasis(&QuotientGraph::new(group, n).unwrap()).unwrap())
        .collect()
}

fn structural_identities() -> Outcome {
    let mut worst_commute = 0.0f64;
    let mut worst_translate = 0.0f64;
    let mut compared = 0usize;
    for spec in [specs::hexagonal(), specs::klein_bottle()] {
        let group = Group::new(spec).unwrap();
        let full = GraphView::full(&group);
        let abelian = GraphView::abelian(&group);
        let id = group.identity();
        let support = full.ball(&id, 10);
        for trial in 0..100 {
            let mut rng = trial_rng(11, trial);
            let field = RandomField::new(&support, &mut rng);
            let f = BallFunction::from_fn(&full, &id, 6, |x| field.at(x));
            let a = f.laplacian(&abelian).unwrap().laplacian(&full).unwrap();
            let b = f.laplacian(&full).unwrap().laplacian(&abelian).unwrap();
            for (x, v) in a.iter() {
                if let Some(w) = b.get(x) {
                    worst_commute = worst_commute.max((v - w).abs());
                    compared += 1;
                }
            }
            // Right translation by z commutes with Δ̃ and Γ̃.
            let z = &support[rng.gen_range(0..support.len().min(40))];
            let fz = BallFunction::from_fn(&full, &id, 6, |x| field.at(&group.multiply(x, z)));
            let lap = fz.laplacian(&abelian).unwrap();
            let gam = fz.gamma(&abelian).unwrap();
            for (x, v) in lap.iter() {
                let xz = group.multiply(x, z);
                worst_translate = worst_translate.max((v - field.laplacian_at(&group, group.s_tilde(), &xz)).abs());
                let g = gam.get(x).unwrap();
                worst_translate = worst_translate.max((g - field.gamma_at(&group, group.s_tilde(), &xz)).abs());
            }
        }
    }
    let ok = worst_commute <= 1e-12 && worst_translate <= 1e-12 && compared > 0;
    outcome(ok, format!("max |ΔΔ̃f − Δ̃Δf| = {worst_commute:e}, max translation residual = {worst_translate:e}"))
}

fn spectral_invariants() -> Outcome {
    let group = hex();
    let mut failures = Vec::new();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for basis in bases(&group, 2..=8) {
        let q = &basis.quotient;
        let n = q.n();
        for block in &basis.blocks {
            let trivial = block.chi.is_trivial();
            if block.lambda_chi > 1e-14 || (trivial != (block.lambda_chi.abs() <= 1e-14)) {
                failures.push(format!("n={n} θ={:?}: λ_χ = {}", block.chi.theta, block.lambda_chi));
            }
        }
        let bound = (q.k() as f64 / q.len() as f64).sqrt();
        for f in &basis.functions {
            let trivial = basis.characters[f.chi].is_trivial();
            if !trivial && f.lambda >= 0.0 {
                failures.push(format!("n={n}: λ_χ,j = {} ≥ 0", f.lambda));
            }
            let sup = f.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if sup > bound + 1e-12 {
                failures.push(format!("n={n}: sup norm {sup} > {bound}"));
            }
            if let Some(beta) = f.beta {
                let full = q.laplacian(Generators::Full, &f.values);
                let ab = q.laplacian(Generators::Abelian, &f.values);
                let r = full.iter().zip(&ab).map(|(a, b)| (a - b * beta).norm()).fold(0.0, f64::max);
                worst.2 = worst.2.max(r);
            }
        }
        worst.0 = worst.0.max(basis.gram_residual);
        worst.1 = worst.1.max(basis.eigen_residual);
    }
    if worst.0 >= 1e-10 {
        failures.push(format!("Gram residual {:e}", worst.0));
    }
    if worst.2 >= 1e-10 {
        failures.push(format!("βΔ̃f = Δf residual {:e}", worst.2));
    }
    let detail = format!(
        "n=2..8: Gram residual {:e}, eigen residual {:e}, βΔ̃f−Δf residual {:e}{}",
        worst.0,
        worst.1,
        worst.2,
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    outcome(failures.is_empty(), detail)
}

fn constant_k() -> Outcome {
    let group = hex();
    let w = compute_k(&group).unwrap();
    let words: Vec<Vec<usize>> = w.decomposition.words.iter().map(|w| w.letters.clone()).collect();
    let expected = vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![0, 2]];
    let letter_ok = w.max_letter == Element::new(vec![0, 0], 1);
    let mut min_beta = f64::INFINITY;
    for basis in bases(&group, 2..=8) {
        min_beta = min_beta.min(basis.min_beta().unwrap());
    }
    let ok = w.k == 8.0 && (w.r, w.m) == (2, 4) && words == expected && letter_ok && min_beta >= 1.0 / 8.0;
    outcome(ok, format!("K = {} (r={}, M={}, letter {}), words {:?}, min β over n=2..8 = {min_beta}", w.k, w.r, w.m, w.max_letter, words))
}

fn kernel_oracle() -> Outcome {
    let group = hex();
    let eps = 1e-12;
    let mut worst = 0.0f64;
    let mut mass_ok = true;
    let mut details = Vec::new();
    for t in [0.5, 1.0, 5.0] {
        let w = heat_kernel_ball(&group, t, eps).unwrap();
        for (x, v) in w.values.iter() {
            let oracle = if x.fidx == 0 { lattice_kernel(&x.vec, t) } else { 0.0 };
            worst = worst.max((v - oracle).abs());
        }
        let mass = w.mass();
        mass_ok &= mass <= 1.0 + 1e-12 && mass >= 1.0 - eps;
        details.push(format!("t={t}: mass {mass}, tail {:e}", w.tail_bound));
    }
    // Spot value independent of the ball machinery.
    let w1 = heat_kernel_ball(&group, 1.0, eps).unwrap();
    let direct = ((-2.0f64).exp() * bessel_i(1, 2.0)) * ((-2.0f64).exp() * bessel_i(1, 2.0));
    let spot = (w1.w(&Element::translation(vec![1, 1])) - direct).abs();
    let ok = worst <= 1e-10 && spot <= 1e-10 && mass_ok;
    outcome(ok, format!("max |w − Bessel product| = {worst:e}; {}", details.join("; ")))
}

fn synthesis_correctness() -> Outcome {
    let group = hex();
    let eps = 1e-13;
    let (mut e0, mut e1, mut min_q, mut b_excess, mut pc) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for basis in bases(&group, [2, 4]) {
        let q = &basis.quotient;
        let gs: Vec<Vec<f64>> = (0..20).map(|i| random_balanced(q, &mut trial_rng(5, i))).collect();
        let plans: Vec<_> = gs.iter().map(|g| make_plan(&basis, g).unwrap()).collect();
        for plan in &plans {
            min_q = min_q.min(plan.min_q());
            b_excess = b_excess.max(plan.b.re - 2f64.sqrt() * plan.g_norm);
        }
        for t in [0.0, 0.3, 1.0, 3.0] {
            let mut cache = KernelCache::new(&group, t, eps);
            for (g, plan) in gs.iter().zip(&plans) {
                let u = synthesize(&basis, plan, &mut cache).unwrap();
                let exact = if t == 0.0 { g.clone() } else { quotient_heat_solve(&basis, g, t) };
                let err = u.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if t == 0.0 {
                    e0 = e0.max(err);
                } else {
                    e1 = e1.max(err);
                    pc = pc.max(pos_comb_check(&basis, plan, &exact, &mut cache, 1e-6).unwrap().residual);
                }
            }
        }
    }
    let ok = e0 <= 1e-8 && e1 <= 1e-6 && min_q >= 0.0 && b_excess <= 1e-12;
    outcome(
        ok,
        format!("t=0 error {e0:e}, t>0 error {e1:e}, Σq·w identity residual {pc:e}, min q {min_q:e}, max Re(B) − √2‖g‖₂ = {b_excess:e}"),
    )
}

fn base_case(summary: &VerifySummary) -> Outcome {
    let d: Vec<String> = summary
        .base_case
        .tori
        .iter()
        .map(|t| format!("(Z/{})^{}: sup {} ≤ {}", t.n, t.d, t.sup, t.bound))
        .collect();
    outcome(summary.base_case.passed, d.join("; "))
}

fn main_bound(summary: &VerifySummary) -> Outcome {
    let run = summary.runs.iter().find(|r| r.n == 6).unwrap();
    let r = &run.report;
    let ok = r.main_verdict == Verdict::Pass
        && r.c_emp_main <= 4.0 + 1e-9
        && r.k == 8.0
        && r.trials == 50
        && r.grid.len() == 40
        && summary.shift_factor == 2;
    outcome(ok, format!("n=6, K={}, 50 trials, shift 2‖g‖₂: sup t·lhs = {} (target 4), min v = {}", r.k, r.c_emp_main, r.min_value))
}

fn log_bound(summary: &VerifySummary) -> Outcome {
    let s = summary.log_stability.as_ref().unwrap();
    let bounded = summary.runs.iter().all(|r| r.report.per_t.iter().all(|p| p.sup_log.is_finite()));
    outcome(
        s.passed && bounded && s.n_first == 6 && s.n_last == 8,
        format!("C_emp_log n=6: {}, n=8: {}, relative change {:.4} (tolerance 0.10)", s.c_first, s.c_last, s.relative_change),
    )
}

fn convergence() -> Outcome {
    let group = hex();
    let id = group.identity();
    let reference = evolve_full(&group, &[(id.clone(), 1.0)], 1.0, 1e-14).unwrap();
    let u_ref = reference.values.get(&id).unwrap();
    let g = BTreeMap::from([(id.clone(), 1.0)]);
    let mut diffs = Vec::new();
    for n in [4, 8, 12, 16] {
        let q = QuotientGraph::new(&group, n).unwrap();
        let basis = assemble_eigenbasis(&q).unwrap();
        let h = periodize(&q, &g).unwrap();
        let u = quotient_heat_solve(&basis, &h.values, 1.0);
        diffs.push((n, (u[q.project(&id)] - u_ref).abs()));
    }
    let ratio = diffs[0].1 / diffs[3].1;
    let monotone = diffs.windows(2).all(|w| w[1].1 < w[0].1);
    outcome(
        ratio >= 10.0 && monotone,
        format!("|u_n(1,1) − u_ref(1,1)| = {:?} (reference tail {:e}), n=4→16 ratio {ratio:e}", diffs, reference.error_bound),
    )
}

fn convexity() -> Outcome {
    let group = hex();
    let q = QuotientGraph::new(&group, 4).unwrap();
    let (mut gamma, mut jensen) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..100 {
        let mut rng = trial_rng(21, i);
        let m = rng.gen_range(2..=5);
        let fs: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
                (0..q.len()).map(|_| scale * rng.gen_range(0.01..1.0)).collect()
            })
            .collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let c: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let r = convexity_check(&q, &c, &fs).unwrap();
        gamma = gamma.max(r.gamma_excess);
        jensen = jensen.max(r.jensen_excess);
    }
    outcome(
        gamma <= 1e-12 && jensen <= 1e-12,
        format!("max Γ̃(√Σcf) − ΣcΓ̃(√f) = {gamma:e}, max Σc log f − log Σcf = {jensen:e} (Σc = 1)"),
    )
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let mut names: Vec<String> = std::fs::read_dir(first)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(first.join(n)).ok() != std::fs::read(second.join(n)).ok())
        .collect();
    outcome(
        differing.is_empty() && !names.is_empty(),
        format!("{} report files compared, {} differ {:?}", names.len(), differing.len(), differing),
    )
}

fn verify_args(out: &Path) -> VerifyArgs {
    VerifyArgs {
        spec: SpecArg { spec: "hexagonal".into() },
        n: Moduli(vec![6, 8]),
        t_min: 0.05,
        t_max: 10.0,
        t_points: 40,
        eps: 1e-12,
        trials: 50,
        seed: 2024,
        out: out.to_path_buf(),
        c_target: Some(4.0),
        k: Some(8.0),
        support_radius: 2,
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, name, o, start.elapsed().as_secs_f64()));
    };
    timed(1, "structural identities", &structural_identities);
    timed(2, "spectral invariants", &spectral_invariants);
    timed(3, "constant K", &constant_k);
    timed(4, "kernel oracle", &kernel_oracle);
    timed(5, "synthesis correctness", &synthesis_correctness);

    let start = Instant::now();
    let summary = run_verify(&verify_args(&out_a), &mut std::io::sink()).expect("verify pipeline runs");
    let pipeline = start.elapsed().as_secs_f64();
    timed(6, "base-case calibration", &|| base_case(&summary));
    timed(7, "main bound", &|| main_bound(&summary));
    timed(8, "log bound", &|| log_bound(&summary));
    timed(9, "convergence", &convergence);
    timed(10, "convexity", &convexity);
    let start = Instant::now();
    let second = run_verify(&verify_args(&out_b), &mut std::io::sink());
    let repeat = start.elapsed().as_secs_f64();
    results.push((
        11,
        "determinism",
        if second.is_ok() { determinism(&out_a, &out_b) } else { outcome(false, "second run failed".into()) },
        repeat,
    ));

    println!("verify pipeline (criteria 6-8, 11 share it): {pipeline:.1}s");
    let mut failed = 0;
    for (n, name, o, secs) in &results {
        println!("criterion {n} ({name}): {} [{secs:.2}s] {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
