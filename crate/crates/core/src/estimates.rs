//! Li-Yau type quantities on finite quotients and their certification.
//!
//! For a positive solution `v` of `∂_t v = Δv` the main quantity is
//! `Γ̃(√v)/(K v) − Δv/(2v)` (the time derivative replaced by the Laplacian),
//! the log quantity is `−Δ̃ log v`; both are reported as `t ·` value.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{word_decompositions, BallFunction, Generators, GraphError, GraphView, WordDecomposition};
use crate::group::{Element, Group};
use crate::heat::{heat_kernel_scaled, SpectralSolution, DEFAULT_MAX_POINTS};
use crate::quotient::{assemble_eigenbasis, EigenBasis, QuotientError, QuotientGraph};
use crate::specs;

/// Slack allowed on asserted inequalities.
pub const ASSERT_TOL: f64 = 1e-9;
/// Slack allowed on the convexity inequalities.
pub const CONVEXITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("solution is not positive: u[{index}] = {value}")]
    NotPositive { index: usize, value: f64 },
    #[error("negative input: {0}")]
    NegativeInput(String),
    #[error("length mismatch: {0}")]
    Length(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
    #[error(transparent)]
    Heat(#[from] crate::heat::HeatError),
}

/// `K = r · M` and the word decompositions that realize it.
#[derive(Clone, Debug, Serialize)]
pub struct KWitness {
    pub k: f64,
    pub r: usize,
    pub m: usize,
    /// Generator of `S` used most often across the decompositions.
    pub max_letter: Element,
    pub decomposition: WordDecomposition,
}

/// Search radius for writing each `s̃ ∈ S̃` as a word in `S`.
const WORD_SEARCH_RADIUS: usize = 32;

pub fn compute_k(group: &Group) -> Result<KWitness, GraphError> {
    let decomposition = word_decompositions(group, WORD_SEARCH_RADIUS)?;
    Ok(KWitness {
        k: decomposition.k as f64,
        r: decomposition.r,
        m: decomposition.m,
        max_letter: group.s()[decomposition.max_letter].clone(),
        decomposition,
    })
}

fn check_positive(u: &[f64]) -> Result<(), EstimateError> {
    match u.iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(EstimateError::NotPositive { index, value: u[index] }),
        None => Ok(()),
    }
}

/// `Γ̃(√u)/(K u) − Δu/(2u)` at every vertex, `Δ` on the full Cayley graph.
pub fn li_yau_eval(q: &QuotientGraph, u: &[f64], k: f64) -> Result<Vec<f64>, EstimateError> {
    check_positive(u)?;
    let root: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
    let grad = q.gamma(Generators::Abelian, &root);
    let lap = q.laplacian(Generators::Full, u);
    Ok(u.iter()
        .zip(grad.iter().zip(&lap))
        .map(|(v, (g, l))| g / (k * v) - l / (2.0 * v))
        .collect())
}

/// `−Δ̃ log u` at every vertex.
pub fn log_eval(q: &QuotientGraph, u: &[f64]) -> Result<Vec<f64>, EstimateError> {
    check_positive(u)?;
    let logs: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    Ok(q.laplacian(Generators::Abelian, &logs).into_iter().map(|v| -v).collect())
}

/// `points` log-spaced values in `[t_min, t_max]`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                t_min
            } else if i == points - 1 {
                t_max
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// 40 log-spaced times in `[0.05, 10]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.05, 10.0, 40)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// No threshold, or the calibration gate failed.
    Unasserted,
}

/// Supremum over vertices and trials at one time.
#[derive(Clone, Debug, Serialize)]
pub struct TimeSummary {
    pub t: f64,
    pub sup_main: f64,
    pub sup_log: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DetailRow {
    pub trial: usize,
    pub x: usize,
    pub t: f64,
    pub lhs_main: f64,
    pub lhs_log: f64,
}

/// Initial data for one run: values on `Φ_n` and the additive shift.
#[derive(Clone, Debug)]
pub struct Trial {
    pub values: Vec<f64>,
    pub shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiYauReport {
    pub group: String,
    pub n: usize,
    pub k: f64,
    pub c_target: Option<f64>,
    pub c_log_target: Option<f64>,
    pub tolerance: f64,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub per_t: Vec<TimeSummary>,
    /// `sup t · lhs_main` over everything evaluated.
    pub c_emp_main: f64,
    pub c_emp_log: f64,
    pub main_verdict: Verdict,
    pub log_verdict: Verdict,
    /// Smallest value of `v` encountered.
    pub min_value: f64,
    #[serde(skip)]
    pub detail: Vec<DetailRow>,
}

/// Evolve every trial on `Φ_n` and evaluate both Li-Yau quantities on the
/// grid. Verdicts are only asserted when `calibrated` is true.
pub fn verify(
    basis: &EigenBasis,
    trials: &[Trial],
    grid: &[f64],
    k: f64,
    c_target: Option<f64>,
    c_log_target: Option<f64>,
    calibrated: bool,
) -> Result<LiYauReport, EstimateError> {
    let q = &basis.quotient;
    let per_trial: Vec<(Vec<DetailRow>, f64)> = trials
        .par_iter()
        .enumerate()
        .map(|(i, trial)| {
            let sol = SpectralSolution::new(basis, &trial.values);
            let mut rows = Vec::with_capacity(grid.len() * q.len());
            let mut min_value = f64::INFINITY;
            for &t in grid {
                let v: Vec<f64> = sol.at(t).into_iter().map(|x| x + trial.shift).collect();
                min_value = v.iter().copied().fold(min_value, f64::min);
                let main = li_yau_eval(q, &v, k)?;
                let log = log_eval(q, &v)?;
                for x in 0..q.len() {
                    rows.push(DetailRow { trial: i, x, t, lhs_main: main[x], lhs_log: log[x] });
                }
            }
            Ok((rows, min_value))
        })
        .collect::<Result<_, EstimateError>>()?;
    let min_value = per_trial.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let detail: Vec<DetailRow> = per_trial.into_iter().flat_map(|p| p.0).collect();
    let per_t: Vec<TimeSummary> = grid
        .iter()
        .map(|&t| {
            let (mut sup_main, mut sup_log) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for r in detail.iter().filter(|r| r.t == t) {
                sup_main = sup_main.max(t * r.lhs_main);
                sup_log = sup_log.max(t * r.lhs_log);
            }
            TimeSummary { t, sup_main, sup_log }
        })
        .collect();
    let c_emp_main = per_t.iter().map(|s| s.sup_main).fold(f64::NEG_INFINITY, f64::max);
    let c_emp_log = per_t.iter().map(|s| s.sup_log).fold(f64::NEG_INFINITY, f64::max);
    let verdict = |target: Option<f64>, emp: f64| match target {
        Some(c) if calibrated => {
            if emp <= c + ASSERT_TOL {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        _ => Verdict::Unasserted,
    };
    Ok(LiYauReport {
        group: q.group().name().to_string(),
        n: q.n(),
        k,
        c_target,
        c_log_target,
        tolerance: ASSERT_TOL,
        grid: grid.to_vec(),
        trials: trials.len(),
        per_t,
        c_emp_main,
        c_emp_log,
        main_verdict: verdict(c_target, c_emp_main),
        log_verdict: verdict(c_log_target, c_emp_log),
        min_value,
        detail,
    })
}

/// Result of the calibration run on one torus.
#[derive(Clone, Debug, Serialize)]
pub struct TorusCalibration {
    pub d: usize,
    pub n: usize,
    pub bound: f64,
    pub sup: f64,
    pub trials: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaseCaseReport {
    pub tori: Vec<TorusCalibration>,
    pub passed: bool,
}

/// Random positive data on a torus: trial 0 is `δ + 0.01`; the rest cycle
/// through a floored point mass, uniform noise and sparse spikes, each with a
/// floor drawn log-uniformly from `[1e-3, 1e-1]`.
pub fn torus_initial(len: usize, trial: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if trial == 0 {
        let mut g = vec![0.01; len];
        g[0] += 1.0;
        return g;
    }
    let floor = 10f64.powf(rng.gen_range(-3.0..-1.0));
    let mut g = vec![floor; len];
    match trial % 3 {
        0 => g[rng.gen_range(0..len)] += 1.0,
        1 => g.iter_mut().for_each(|v| *v += rng.gen::<f64>()),
        _ => g.iter_mut().for_each(|v| {
            if rng.gen_bool(0.1) {
                *v += rng.gen::<f64>();
            }
        }),
    }
    g
}

/// Per-trial generator: one ChaCha stream per trial index.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Calibrate the constant convention on `(Z/n)^d` with `S̃ = {±e_i}`, where
/// the bound is `|S̃| = 2d`.
pub fn verify_torus(d: usize, n: usize, trials: usize, grid: &[f64], seed: u64) -> Result<TorusCalibration, EstimateError> {
    let group = Group::new(specs::lattice(d)).expect("lattice spec is valid");
    let q = QuotientGraph::new(&group, n)?;
    let basis = assemble_eigenbasis(&q)?;
    let runs: Vec<Trial> = (0..trials)
        .map(|i| Trial { values: torus_initial(q.len(), i, &mut trial_rng(seed, i)), shift: 0.0 })
        .collect();
    let bound = (2 * d) as f64;
    let report = verify(&basis, &runs, grid, 1.0, Some(bound), None, true)?;
    Ok(TorusCalibration {
        d,
        n,
        bound,
        sup: report.c_emp_main,
        trials,
        passed: report.main_verdict == Verdict::Pass,
    })
}

/// The two calibration tori: `(Z/16)¹` and `(Z/8)²`.
pub fn verify_base_case(trials: usize, grid: &[f64], seed: u64) -> Result<BaseCaseReport, EstimateError> {
    let tori = vec![verify_torus(1, 16, trials, grid, seed)?, verify_torus(2, 8, trials, grid, seed)?];
    let passed = tori.iter().all(|t| t.passed);
    Ok(BaseCaseReport { tori, passed })
}

/// Random non-negative data on the full-view ball of `radius` around the
/// identity, values uniform in `[0, 1)`.
pub fn random_support_data(group: &Group, radius: usize, rng: &mut ChaCha8Rng) -> BTreeMap<Element, f64> {
    GraphView::full(group)
        .ball(&group.identity(), radius)
        .into_iter()
        .map(|x| (x, rng.gen::<f64>()))
        .collect()
}

/// Random non-negative data on `Φ_n` with equal coset sums: uniform values,
/// then each coset topped up evenly to the largest sum.
pub fn random_balanced(q: &QuotientGraph, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut g: Vec<f64> = (0..q.len()).map(|_| rng.gen::<f64>()).collect();
    let sums = q.coset_sums(&g);
    let target = sums.iter().copied().fold(0.0, f64::max);
    let ls = q.lattice_size();
    for (c, s) in sums.iter().enumerate() {
        let add = (target - s) / ls as f64;
        g[c * ls..(c + 1) * ls].iter_mut().for_each(|v| *v += add);
    }
    g
}

/// Residuals of the two convexity inequalities for `u = Σ c_i f_i`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    /// `max_x Γ̃(√u)(x) − Σ c_i Γ̃(√f_i)(x)`; should be `≤ 0`.
    pub gamma_excess: f64,
    /// `max_x [Σ c_i log f_i(x) − log u(x)]`; `≤ 0` when `Σ c_i = 1`.
    pub jensen_excess: f64,
    /// `max_x [−Δ̃ log u(x) − Σ c_i (−Δ̃ log f_i)(x)]`; reported only.
    pub log_laplacian_excess: f64,
    pub weight_sum: f64,
    pub passed: bool,
}

pub fn convexity_check(q: &QuotientGraph, c: &[f64], fs: &[Vec<f64>]) -> Result<ConvexityReport, EstimateError> {
    if c.len() != fs.len() {
        return Err(EstimateError::Length(format!("{} weights for {} functions", c.len(), fs.len())));
    }
    if let Some(v) = c.iter().find(|v| !(**v >= 0.0)) {
        return Err(EstimateError::NegativeInput(format!("weight {v}")));
    }
    for f in fs {
        if f.len() != q.len() {
            return Err(EstimateError::Length(format!("function of length {}", f.len())));
        }
        if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
            return Err(EstimateError::NegativeInput(format!("value {v}")));
        }
    }
    let mut u = vec![0.0; q.len()];
    for (ci, f) in c.iter().zip(fs) {
        u.iter_mut().zip(f).for_each(|(a, b)| *a += ci * b);
    }
    let sqrt = |f: &[f64]| f.iter().map(|v| v.sqrt()).collect::<Vec<_>>();
    let lhs = q.gamma(Generators::Abelian, &sqrt(&u));
    let mut rhs = vec![0.0; q.len()];
    for (ci, f) in c.iter().zip(fs) {
        let g = q.gamma(Generators::Abelian, &sqrt(f));
        rhs.iter_mut().zip(&g).for_each(|(a, b)| *a += ci * b);
    }
    let gamma_excess = lhs.iter().zip(&rhs).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);

    let positive = u.iter().all(|&v| v > 0.0) && fs.iter().all(|f| f.iter().all(|&v| v > 0.0));
    let (jensen_excess, log_laplacian_excess) = if positive {
        let mut mix = vec![0.0; q.len()];
        let mut mix_lap = vec![0.0; q.len()];
        for (ci, f) in c.iter().zip(fs) {
            let lf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
            mix.iter_mut().zip(&lf).for_each(|(a, b)| *a += ci * b);
            let lap = log_eval(q, f)?;
            mix_lap.iter_mut().zip(&lap).for_each(|(a, b)| *a += ci * b);
        }
        let jensen = mix.iter().zip(&u).map(|(m, v)| m - v.ln()).fold(f64::NEG_INFINITY, f64::max);
        let lu = log_eval(q, &u)?;
        let ll = lu.iter().zip(&mix_lap).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        (jensen, ll)
    } else {
        // A zero f_i with c_i > 0 makes Σ c_i log f_i = −∞.
        (f64::NEG_INFINITY, f64::NAN)
    };
    let weight_sum: f64 = c.iter().sum();
    let normalized = (weight_sum - 1.0).abs() <= 1e-12;
    let passed = gamma_excess <= CONVEXITY_TOL && (!normalized || jensen_excess <= CONVEXITY_TOL);
    Ok(ConvexityReport { gamma_excess, jensen_excess, log_laplacian_excess, weight_sum, passed })
}

/// Worst value of `(1/K)Γ̃(√w) − β Δ̃w/2 − (C/t) w` for `w = w(·, βt)` on the
/// Abelian ball of `radius` around the identity; `≤ 0` confirms the gradient
/// bound for every translate `w(x z⁻¹, βt)` with `x z⁻¹` in that ball.
pub fn kernel_gradient_excess(
    group: &Group,
    beta: f64,
    t: f64,
    k: f64,
    c: f64,
    radius: usize,
    eps: f64,
) -> Result<f64, EstimateError> {
    let w = heat_kernel_scaled(group, beta, t, eps, DEFAULT_MAX_POINTS)?;
    let view = GraphView::abelian(group);
    let root: BallFunction<f64> = w.values.map(f64::sqrt);
    let grad = root.gamma(&view)?;
    let lap = w.values.laplacian(&view)?;
    let mut worst = f64::NEG_INFINITY;
    for (i, x) in w.values.points().iter().enumerate() {
        if w.values.distance(i) > radius {
            break;
        }
        let wx = w.values.values()[i];
        let g = grad.get(x).expect("inside the valid region");
        let l = lap.get(x).expect("inside the valid region");
        worst = worst.max(g / k - beta * l / 2.0 - c / t * wx);
    }
    Ok(worst)
}
