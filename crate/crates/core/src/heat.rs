//! Heat flow on the infinite graphs and on finite quotients.
//!
//! On an infinite Cayley graph of degree `D` the heat semigroup is evaluated by
//! uniformization: `e^{tΔ} = Σ_m Pois(m; Dt) P^m` with `P` the simple random
//! walk. Every term is non-negative and after `R` jumps the walk has moved at
//! most `R` steps, so stopping at `R` gives values that are exact on the ball
//! up to the missing Poisson mass `P(N > R)`, which is the certified tail.
//!
//! On a quotient `Φ_n` the exact solution is the eigen-expansion over the
//! joint eigenbasis.

use nalgebra::ComplexField;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{BallFunction, Generators, GraphView};
use crate::group::{Element, Group};
use crate::quotient::{EigenBasis, PeriodicLift, QuotientGraph};
use crate::Complex64;

/// Default cap on the number of ball vertices a truncated evolution may use.
pub const DEFAULT_MAX_POINTS: usize = 4_000_000;

#[derive(Debug, Error)]
pub enum HeatError {
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("truncation needs radius {required_radius}, exceeding the cap of {cap} ball points")]
    ResourceExceeded { required_radius: usize, cap: usize },
    #[error("function is not {n}-periodic: {x} and {y} share a class but differ")]
    NotPeriodic { n: usize, x: Element, y: Element },
    #[error("function does not cover every class of Φ_{n}")]
    IncompleteCover { n: usize },
    #[error("support point {0} not found within radius {1}")]
    SupportTooFar(Element, usize),
}

/// Poisson weights `Pois(m; mean)` for `m = 0..=R` with certified tail
/// `P(N > R) ≤ tail`.
#[derive(Clone, Debug)]
pub struct PoissonTruncation {
    pub mean: f64,
    pub pmf: Vec<f64>,
    pub tail: f64,
}

impl PoissonTruncation {
    /// Smallest `R` with `P(N > R) ≤ eps`.
    pub fn new(mean: f64, eps: f64) -> Self {
        if mean == 0.0 {
            return PoissonTruncation { mean, pmf: vec![1.0], tail: 0.0 };
        }
        // pmf in log space; walk well past the mode until terms are negligible.
        let ln_mean = mean.ln();
        let mut ln_p = -mean;
        let mut pmf = vec![ln_p.exp()];
        let mut m = 0usize;
        loop {
            m += 1;
            ln_p += ln_mean - (m as f64).ln();
            pmf.push(ln_p.exp());
            if m as f64 > mean && ln_p < (eps * 1e-6).ln().min(-700.0) {
                break;
            }
        }
        // Geometric bound on the mass beyond the last computed term.
        let ratio = mean / (m as f64 + 1.0);
        let remainder = pmf[m] * ratio / (1.0 - ratio);
        let mut tails = vec![0.0; m + 1];
        let mut acc = remainder;
        for j in (0..=m).rev() {
            tails[j] = acc;
            acc += pmf[j];
        }
        let r = tails.iter().position(|&t| t <= eps).unwrap_or(m);
        pmf.truncate(r + 1);
        PoissonTruncation { mean, pmf, tail: tails[r] }
    }

    /// Number of jumps kept.
    pub fn jumps(&self) -> usize {
        self.pmf.len() - 1
    }
}

/// A truncated solution of `∂_t u = Δu` on the infinite graph.
#[derive(Clone, Debug)]
pub struct Evolved {
    pub values: BallFunction<f64>,
    /// Pointwise error bound: `‖g‖_∞ · P(N > R)`.
    pub error_bound: f64,
    pub jumps: usize,
}

/// Evolve finitely supported `initial` data for time `t` on `view`.
///
/// The result is valid on the ball around the identity of radius
/// `support radius + R`; values are exact up to the Poisson tail.
pub fn evolve_on_ball(
    view: &GraphView<'_>,
    initial: &[(Element, f64)],
    t: f64,
    eps: f64,
    max_points: usize,
) -> Result<Evolved, HeatError> {
    if t < 0.0 {
        return Err(HeatError::NegativeTime(t));
    }
    if !(eps > 0.0) {
        return Err(HeatError::BadTolerance(eps));
    }
    let group = view.group();
    let center = group.identity();
    let degree = view.degree();
    let poisson = PoissonTruncation::new(degree as f64 * t, eps);
    let jumps = poisson.jumps();

    // Support radius: the furthest initial point from the identity.
    let mut support_radius = 0;
    for (x, _) in initial {
        let r = crate::graph::GraphView::new(group, view.kind())
            .word_length(x, 512)
            .map_err(|_| HeatError::SupportTooFar(x.clone(), 512))?;
        support_radius = support_radius.max(r);
    }
    let radius = support_radius + jumps;
    let pts = view
        .ball_capped(&center, radius, max_points)
        .ok_or(HeatError::ResourceExceeded { required_radius: radius, cap: max_points })?;
    let index: std::collections::HashMap<&Element, usize> =
        pts.iter().enumerate().map(|(i, (x, _))| (x, i)).collect();
    let dist: Vec<usize> = pts.iter().map(|(_, d)| *d).collect();
    let gens = view.generators();
    // usize::MAX marks a neighbor outside the ball, where the previous
    // iterate vanishes.
    let nbrs: Vec<usize> = pts
        .iter()
        .flat_map(|(x, _)| {
            gens.iter()
                .map(|s| index.get(&group.multiply(x, s)).copied().unwrap_or(usize::MAX))
                .collect::<Vec<_>>()
        })
        .collect();

    let mut p = vec![0.0; pts.len()];
    let mut sup = 0.0f64;
    for (x, v) in initial {
        p[index[x]] += v;
    }
    for v in &p {
        sup = sup.max(v.abs());
    }
    let mut acc: Vec<f64> = p.iter().map(|v| v * poisson.pmf[0]).collect();
    let inv_deg = 1.0 / degree as f64;
    let mut next = vec![0.0; pts.len()];
    for m in 1..=jumps {
        // Iterate m is supported within support_radius + m.
        let live = dist.partition_point(|&d| d <= support_radius + m);
        for i in 0..live {
            let row = &nbrs[i * gens.len()..(i + 1) * gens.len()];
            let s: f64 = row.iter().map(|&j| if j == usize::MAX { 0.0 } else { p[j] }).sum();
            next[i] = s * inv_deg;
        }
        std::mem::swap(&mut p, &mut next);
        let w = poisson.pmf[m];
        for i in 0..live {
            acc[i] += w * p[i];
        }
    }
    for v in &mut acc {
        if *v < 0.0 && *v >= -1e-15 {
            *v = 0.0;
        }
    }
    let values = BallFunction::from_parts(view.kind(), center, radius, pts, acc);
    Ok(Evolved { values, error_bound: sup * poisson.tail, jumps })
}

/// Heat kernel `w(·, βt)` of `G̃` started from `δ_1`.
#[derive(Clone, Debug)]
pub struct HeatState {
    pub values: BallFunction<f64>,
    pub time: f64,
    pub beta: f64,
    /// Certified bound on the kernel mass outside the ball.
    pub tail_bound: f64,
}

impl HeatState {
    /// Effective time `βt` at which the kernel is evaluated.
    pub fn kernel_time(&self) -> f64 {
        self.beta * self.time
    }

    /// `w(x, βt)`; zero off the lattice coset of the identity.
    pub fn w(&self, x: &Element) -> f64 {
        if !x.is_translation() {
            return 0.0;
        }
        self.values.lookup(x).value
    }

    pub fn mass(&self) -> f64 {
        self.values.values().iter().sum()
    }

    pub fn radius(&self) -> usize {
        self.values.radius()
    }

    /// Sum the kernel over classes of `Z^d / nZ^d`.
    pub fn fold(&self, q: &QuotientGraph) -> FoldedKernel {
        let mut weights = vec![0.0; q.lattice_size()];
        for (x, v) in self.values.iter() {
            weights[q.lattice_class(&x.vec)] += v;
        }
        FoldedKernel { n: q.n(), weights, tail: self.tail_bound }
    }
}

/// `w(·, βt)` on `G̃`, truncated with Poisson tail at most `eps`.
pub fn heat_kernel_scaled(
    group: &Group,
    beta: f64,
    t: f64,
    eps: f64,
    max_points: usize,
) -> Result<HeatState, HeatError> {
    let view = GraphView::abelian(group);
    let ev = evolve_on_ball(&view, &[(group.identity(), 1.0)], beta * t, eps, max_points)?;
    Ok(HeatState { values: ev.values, time: t, beta, tail_bound: ev.error_bound })
}

/// `w(·, t)` on `G̃`.
pub fn heat_kernel_ball(group: &Group, t: f64, eps: f64) -> Result<HeatState, HeatError> {
    heat_kernel_scaled(group, 1.0, t, eps, DEFAULT_MAX_POINTS)
}

/// Kernel mass per lattice class mod `n`.
#[derive(Clone, Debug, Serialize)]
pub struct FoldedKernel {
    pub n: usize,
    pub weights: Vec<f64>,
    pub tail: f64,
}

impl FoldedKernel {
    /// `Σ_z h(π_n z) w(x z⁻¹)` for a function `h` on `Φ_n`, given `x` by its
    /// vertex index. Grouping `z = y⁻¹ x` by the class of `y ∈ Z^d` turns the
    /// infinite sum into `Σ_c W(c) h(c⁻¹ · π_n x)`.
    pub fn convolve_at<T>(&self, q: &QuotientGraph, h: &[T], x: usize) -> T
    where
        T: ComplexField<RealField = f64> + Copy,
    {
        let xe = q.element(x);
        let d = q.d();
        let mut acc = T::zero();
        let mut shifted = vec![0i64; d];
        for (c, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let cv = q.element(c).vec;
            for i in 0..d {
                shifted[i] = xe.vec[i] - cv[i];
            }
            acc += h[q.index_of(&shifted, xe.fidx)] * T::from_real(w);
        }
        acc
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Output of [`translate_sum`].
#[derive(Clone, Debug)]
pub struct TranslateSum {
    pub points: Vec<Element>,
    pub values: Vec<Complex64>,
    /// Pointwise bound on the truncation error.
    pub error_bound: f64,
}

/// `u(x) = Σ_{z∈Φ} (f(z) + a) · w(x z⁻¹, βt)` for a periodic `f`, at `points`.
pub fn translate_sum(
    kernel: &HeatState,
    f: &PeriodicLift<'_, Complex64>,
    a: Complex64,
    points: &[Element],
) -> TranslateSum {
    let q = f.quotient();
    let folded = kernel.fold(q);
    let shifted: Vec<Complex64> = f.values().iter().map(|v| v + a).collect();
    let values = points
        .iter()
        .map(|x| folded.convolve_at(q, &shifted, q.project(x)))
        .collect();
    let sup = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    TranslateSum { points: points.to_vec(), values, error_bound: (sup + a.norm()) * kernel.tail_bound }
}

/// Read a function given on a ball as an `n`-periodic function on `Φ_n`,
/// rejecting it if two points of one class disagree or a class is missing.
pub fn periodic_values(
    q: &QuotientGraph,
    f: &BallFunction<Complex64>,
    tol: f64,
) -> Result<Vec<Complex64>, HeatError> {
    let mut vals: Vec<Option<(Element, Complex64)>> = vec![None; q.len()];
    for (x, v) in f.iter() {
        let c = q.project(x);
        match &vals[c] {
            None => vals[c] = Some((x.clone(), v)),
            Some((y, w)) if (w - v).norm() > tol => {
                return Err(HeatError::NotPeriodic { n: q.n(), x: x.clone(), y: y.clone() })
            }
            Some(_) => {}
        }
    }
    vals.into_iter()
        .map(|v| v.map(|(_, z)| z))
        .collect::<Option<Vec<_>>>()
        .ok_or(HeatError::IncompleteCover { n: q.n() })
}

/// Exact solution on `Φ_n` via the eigen-expansion of the initial data.
#[derive(Clone, Debug)]
pub struct SpectralSolution<'b> {
    basis: &'b EigenBasis,
    coeffs: Vec<Complex64>,
}

impl<'b> SpectralSolution<'b> {
    pub fn new(basis: &'b EigenBasis, g: &[f64]) -> Self {
        SpectralSolution { basis, coeffs: basis.expand_real(g) }
    }

    pub fn new_complex(basis: &'b EigenBasis, g: &[Complex64]) -> Self {
        let coeffs = basis.functions.iter().map(|f| EigenBasis::inner(g, &f.values)).collect();
        SpectralSolution { basis, coeffs }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn combine(&self, weight: impl Fn(f64) -> f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.basis.quotient.len()];
        for (c, f) in self.coeffs.iter().zip(&self.basis.functions) {
            let w = c * weight(f.lambda);
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&f.values) {
                *o += w * v;
            }
        }
        out
    }

    pub fn at_complex(&self, t: f64) -> Vec<Complex64> {
        self.combine(|lambda| (lambda * t).exp())
    }

    /// Real part of `u(·, t)`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        self.at_complex(t).into_iter().map(|z| z.re).collect()
    }

    /// `∂_t u(·, t) = Δu(·, t)`.
    pub fn time_derivative(&self, t: f64) -> Vec<f64> {
        self.combine(|lambda| lambda * (lambda * t).exp())
            .into_iter()
            .map(|z| z.re)
            .collect()
    }
}

/// `u(·, t) = Σ ⟨g, f_{χ,j}⟩ e^{λ_{χ,j} t} f_{χ,j}` on `Φ_n`.
pub fn quotient_heat_solve(basis: &EigenBasis, g: &[f64], t: f64) -> Vec<f64> {
    SpectralSolution::new(basis, g).at(t)
}

/// Kernel with the view it lives on, for callers that need a non-Abelian walk.
pub fn evolve_full(
    group: &Group,
    initial: &[(Element, f64)],
    t: f64,
    eps: f64,
) -> Result<Evolved, HeatError> {
    evolve_on_ball(&GraphView::new(group, Generators::Full), initial, t, eps, DEFAULT_MAX_POINTS)
}
