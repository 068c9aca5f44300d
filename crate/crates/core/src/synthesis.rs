//! Heat solutions assembled from translates of the Abelian heat kernel.
//!
//! A function `g` on `Φ_n` with equal coset sums expands as
//! `g = Σ c_{χ,j} f_{χ,j}` with no `f_{𝟙,j≥2}` component. Each term evolves
//! under the full Laplacian exactly as the Abelian kernel run at time
//! `β_{χ,j} t` acting on `f_{χ,j}∘π_n`, so the solution with initial data
//! `g∘π_n` is a combination of kernel translates. Shifting every term by
//! `a_{χ,j}` makes the weights non-negative.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphView, Generators};
use crate::group::{Element, Group};
use crate::heat::{heat_kernel_scaled, FoldedKernel, HeatError, DEFAULT_MAX_POINTS};
use crate::quotient::{EigenBasis, QuotientGraph};
use crate::Complex64;

/// Weights below this indicate a broken eigenbasis.
pub const Q_HARD_TOL: f64 = 1e-9;
const COSET_SUM_TOL: f64 = 1e-9;
const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Coefficients this small relative to `‖g‖₂` are round-off and dropped.
const NEGLIGIBLE_COEFF: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("coset sums differ: coset {coset_a} sums to {sum_a}, coset {coset_b} to {sum_b}")]
    UnequalCosetSums { coset_a: usize, sum_a: f64, coset_b: usize, sum_b: f64 },
    #[error("expected {expected} values, got {got}")]
    Length { got: usize, expected: usize },
    #[error("expansion does not reconstruct g (residual {0:e})")]
    Reconstruction(f64),
    #[error("weight q = {value:e} for θ={theta:?}, j={j} is negative")]
    NegativeWeight { theta: Vec<usize>, j: usize, value: f64 },
    #[error("positive-combination identity off by {residual:e} (tolerance {tolerance:e})")]
    IdentityResidual { residual: f64, tolerance: f64 },
    #[error("periodization needs n ≥ 4, got {0}")]
    ModulusTooSmall(usize),
    #[error("initial data must be non-negative and finite, got {value} at {at}")]
    BadInitialData { at: Element, value: f64 },
    #[error("coset {0} has no annulus cells to absorb its deficit")]
    NoAnnulus(usize),
    #[error(transparent)]
    Heat(#[from] HeatError),
}

/// `c_{χ,j} = ⟨g, f_{χ,j}⟩`, in basis order, with the excluded trivial
/// components set to zero.
pub fn coefficients(basis: &EigenBasis, g: &[f64]) -> Result<Vec<Complex64>, SynthesisError> {
    let q = &basis.quotient;
    if g.len() != q.len() {
        return Err(SynthesisError::Length { got: g.len(), expected: q.len() });
    }
    let norm = l2(g);
    let sums = q.coset_sums(g);
    for (b, &sb) in sums.iter().enumerate().skip(1) {
        if (sb - sums[0]).abs() > COSET_SUM_TOL * norm {
            return Err(SynthesisError::UnequalCosetSums { coset_a: 0, sum_a: sums[0], coset_b: b, sum_b: sb });
        }
    }
    let mut c = basis.expand_real(g);
    for (ci, f) in c.iter_mut().zip(&basis.functions) {
        if f.is_excluded() {
            *ci = Complex64::new(0.0, 0.0);
        }
    }
    let mut residual = 0.0f64;
    for (x, gx) in g.iter().enumerate() {
        let s: Complex64 = c.iter().zip(&basis.functions).map(|(ci, f)| ci * f.values[x]).sum();
        residual = residual.max((s - gx).norm());
    }
    if residual > RECONSTRUCTION_TOL * norm.max(1.0) {
        return Err(SynthesisError::Reconstruction(residual));
    }
    Ok(c)
}

/// One `(χ, j)` term of a plan.
#[derive(Clone, Debug, Serialize)]
pub struct PlanTerm {
    /// Index into the eigenbasis.
    pub basis_index: usize,
    pub theta: Vec<usize>,
    pub j: usize,
    pub c: Complex64,
    pub a: Complex64,
    pub beta: f64,
    pub lambda: f64,
    /// `q(χ, j, z)` indexed by the class `π_n(z)`.
    pub q: Vec<f64>,
}

/// Coefficients, shifts and non-negative weights of the synthesis.
#[derive(Clone, Debug, Serialize)]
pub struct SynthesisPlan {
    pub n: usize,
    pub k: usize,
    /// Terms with non-negligible `c`.
    pub terms: Vec<PlanTerm>,
    /// `B = Σ c a`.
    pub b: Complex64,
    /// `√k ‖g‖₂`.
    pub b_bound: f64,
    pub g_norm: f64,
    /// Additive constant `k ‖g‖₂` applied to the target solution.
    pub shift: f64,
    /// Largest magnitude clamped from a slightly negative `q` (round-off).
    pub max_clamp: f64,
}

impl SynthesisPlan {
    /// `√k ‖g‖₂ − Re(B)`.
    pub fn slack(&self) -> f64 {
        self.b_bound - self.b.re
    }

    pub fn min_q(&self) -> f64 {
        self.terms.iter().flat_map(|t| t.q.iter().copied()).fold(f64::INFINITY, f64::min)
    }
}

/// Build the plan for `g` on `Φ_n`.
pub fn make_plan(basis: &EigenBasis, g: &[f64]) -> Result<SynthesisPlan, SynthesisError> {
    let q = &basis.quotient;
    let c = coefficients(basis, g)?;
    let g_norm = l2(g);
    let k = q.k();
    let mut terms = Vec::new();
    let mut b = Complex64::new(0.0, 0.0);
    let mut max_clamp = 0.0f64;
    for (idx, (ci, f)) in c.iter().zip(&basis.functions).enumerate() {
        if ci.norm() <= NEGLIGIBLE_COEFF * g_norm {
            continue;
        }
        let a = ci.conj() / ci.norm() * f.sup_norm;
        b += ci * a;
        let mut weights = Vec::with_capacity(q.len());
        for v in &f.values {
            let w = (ci * (v + a)).re;
            if w < -Q_HARD_TOL {
                return Err(SynthesisError::NegativeWeight {
                    theta: basis.characters[f.chi].theta.clone(),
                    j: f.j,
                    value: w,
                });
            }
            if w < 0.0 {
                max_clamp = max_clamp.max(-w);
            }
            weights.push(w.max(0.0));
        }
        terms.push(PlanTerm {
            basis_index: idx,
            theta: basis.characters[f.chi].theta.clone(),
            j: f.j,
            c: *ci,
            a,
            beta: f.beta.expect("excluded terms have zero coefficient"),
            lambda: f.lambda,
            q: weights,
        });
    }
    Ok(SynthesisPlan {
        n: q.n(),
        k,
        terms,
        b,
        b_bound: (k as f64).sqrt() * g_norm,
        g_norm,
        shift: k as f64 * g_norm,
        max_clamp,
    })
}

/// Folded kernels keyed by the bits of `β`.
pub struct KernelCache<'g> {
    group: &'g Group,
    t: f64,
    eps: f64,
    max_points: usize,
    kernels: HashMap<u64, FoldedKernel>,
}

impl<'g> KernelCache<'g> {
    pub fn new(group: &'g Group, t: f64, eps: f64) -> Self {
        KernelCache { group, t, eps, max_points: DEFAULT_MAX_POINTS, kernels: HashMap::new() }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_max_points(mut self, max_points: usize) -> Self {
        self.max_points = max_points;
        self
    }

    /// Build kernels for all `betas` in parallel.
    pub fn prefill(&mut self, q: &QuotientGraph, betas: &[f64]) -> Result<(), HeatError> {
        let missing: Vec<f64> = betas.iter().copied().filter(|b| !self.kernels.contains_key(&b.to_bits())).collect();
        let built: Vec<(u64, FoldedKernel)> = missing
            .par_iter()
            .map(|&b| {
                let w = heat_kernel_scaled(self.group, b, self.t, self.eps, self.max_points)?;
                Ok((b.to_bits(), w.fold(q)))
            })
            .collect::<Result<_, HeatError>>()?;
        self.kernels.extend(built);
        Ok(())
    }

    pub fn get(&mut self, q: &QuotientGraph, beta: f64) -> Result<&FoldedKernel, HeatError> {
        use std::collections::hash_map::Entry;
        match self.kernels.entry(beta.to_bits()) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => {
                let w = heat_kernel_scaled(self.group, beta, self.t, self.eps, self.max_points)?;
                Ok(e.insert(w.fold(q)))
            }
        }
    }
}

/// Synthesized solution, stored per class of `Φ_n` (it is periodic).
#[derive(Clone, Debug)]
pub struct Synthesized {
    pub t: f64,
    pub values: Vec<f64>,
    /// `∂_t u` from the kernel equation `∂_t w = Δ̃w`.
    pub time_derivative: Vec<f64>,
    /// Pointwise bound on the truncation error of `values`.
    pub error_bound: f64,
}

impl Synthesized {
    pub fn eval(&self, q: &QuotientGraph, x: &Element) -> f64 {
        self.values[q.project(x)]
    }
}

/// `Δ̃` on a folded kernel, i.e. on `Z^d / nZ^d` with the Abelian generators.
fn folded_laplacian(q: &QuotientGraph, k: &FoldedKernel) -> Vec<f64> {
    let gens = q.group().s_tilde();
    let n = q.n() as i64;
    (0..k.weights.len())
        .map(|c| {
            let v = q.element(c).vec;
            let s: f64 = gens
                .iter()
                .map(|s| {
                    let shifted: Vec<i64> = v.iter().zip(&s.vec).map(|(a, b)| (a + b).rem_euclid(n)).collect();
                    k.weights[q.lattice_class(&shifted)]
                })
                .sum();
            s - gens.len() as f64 * k.weights[c]
        })
        .collect()
}

/// `u(x,t) = Re Σ c (f∘π_n + a) * w(·, βt) − Re B` on every class of `Φ_n`.
/// Kernels come from `cache`, which fixes `t` and the tail tolerance.
pub fn synthesize(
    basis: &EigenBasis,
    plan: &SynthesisPlan,
    cache: &mut KernelCache<'_>,
) -> Result<Synthesized, SynthesisError> {
    let q = &basis.quotient;
    let t = cache.t();
    let mut values = vec![-plan.b.re; q.len()];
    let mut deriv = vec![0.0; q.len()];
    let mut error_bound = 0.0;
    for term in &plan.terms {
        let f = &basis.functions[term.basis_index];
        let kernel = cache.get(q, term.beta)?.clone();
        let lap = FoldedKernel { weights: folded_laplacian(q, &kernel), ..kernel.clone() };
        let h: Vec<Complex64> = f.values.iter().map(|v| term.c * (v + term.a)).collect();
        for x in 0..q.len() {
            values[x] += kernel.convolve_at(q, &h, x).re;
            deriv[x] += term.beta * lap.convolve_at(q, &h, x).re;
        }
        let sup = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        error_bound += sup * kernel.tail;
    }
    Ok(Synthesized { t, values, time_derivative: deriv, error_bound })
}

/// Outcome of checking `u + Re B = Σ q · w(x z⁻¹, βt)` against an oracle.
#[derive(Clone, Debug, Serialize)]
pub struct PosCombReport {
    pub t: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub truncation_bound: f64,
    pub min_q: f64,
    pub b: f64,
    pub b_bound: f64,
    pub slack: f64,
}

/// Compare the `q`-weighted kernel sum with `oracle + Re B`, where `oracle`
/// is the exact solution on `Φ_n` at time `t`.
pub fn pos_comb_check(
    basis: &EigenBasis,
    plan: &SynthesisPlan,
    oracle: &[f64],
    cache: &mut KernelCache<'_>,
    tolerance: f64,
) -> Result<PosCombReport, SynthesisError> {
    let q = &basis.quotient;
    let t = cache.t();
    let mut rhs = vec![0.0; q.len()];
    let mut truncation_bound = 0.0;
    for term in &plan.terms {
        let kernel = cache.get(q, term.beta)?;
        for (x, r) in rhs.iter_mut().enumerate() {
            *r += kernel.convolve_at(q, &term.q, x);
        }
        truncation_bound += term.q.iter().fold(0.0, |m: f64, v| m.max(*v)) * kernel.tail;
    }
    let residual = rhs
        .iter()
        .zip(oracle)
        .map(|(r, u)| (r - u - plan.b.re).abs())
        .fold(0.0, f64::max);
    let report = PosCombReport {
        t,
        residual,
        tolerance,
        truncation_bound,
        min_q: plan.min_q().min(f64::MAX),
        b: plan.b.re,
        b_bound: plan.b_bound,
        slack: plan.slack(),
    };
    if residual > tolerance + truncation_bound {
        return Err(SynthesisError::IdentityResidual { residual, tolerance });
    }
    Ok(report)
}

/// Initial data restricted to a transversal and balanced across cosets.
#[derive(Clone, Debug, Serialize)]
pub struct Periodization {
    pub n: usize,
    /// `h′_n` per class of `Φ_n`.
    pub values: Vec<f64>,
    /// Representative in `H_n` of each class.
    pub transversal: Vec<Element>,
    /// Whether the representative lies in `H_{⌊n/2⌋}` (left untouched).
    pub inner: Vec<bool>,
    /// `‖g|_{H_n}‖₂`.
    pub restricted_norm: f64,
    /// `‖h′_n‖₂`.
    pub norm: f64,
    /// `√k ‖g|_{H_n}‖₂`.
    pub norm_bound: f64,
    pub norm_certified: bool,
    /// Mass added per coset.
    pub added: Vec<f64>,
}

/// Transversal of `π_n` grown by breadth-first search from the identity:
/// each class is represented by its first vertex in BFS order.
pub fn bfs_transversal(q: &QuotientGraph) -> Vec<Element> {
    let group = q.group();
    let view = GraphView::new(group, Generators::Full);
    let mut reps: Vec<Option<Element>> = vec![None; q.len()];
    let mut missing = q.len();
    let mut radius = q.n();
    loop {
        for (x, _) in view.ball_with_distances(&group.identity(), radius) {
            let c = q.project(&x);
            if reps[c].is_none() {
                reps[c] = Some(x);
                missing -= 1;
            }
        }
        if missing == 0 {
            return reps.into_iter().map(|r| r.expect("covered")).collect();
        }
        reps.iter_mut().for_each(|r| *r = None);
        missing = q.len();
        radius *= 2;
    }
}

/// Build `h′_n` from non-negative `g` given by its support.
pub fn periodize(q: &QuotientGraph, g: &BTreeMap<Element, f64>) -> Result<Periodization, SynthesisError> {
    let n = q.n();
    if n < 4 {
        return Err(SynthesisError::ModulusTooSmall(n));
    }
    for (x, &v) in g {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SynthesisError::BadInitialData { at: x.clone(), value: v });
        }
    }
    let transversal = bfs_transversal(q);
    let half = QuotientGraph::new(q.group(), n / 2).map_err(|_| SynthesisError::ModulusTooSmall(n))?;
    let half_set: std::collections::HashSet<Element> = bfs_transversal(&half).into_iter().collect();
    let inner: Vec<bool> = transversal.iter().map(|x| half_set.contains(x)).collect();

    let mut values: Vec<f64> = transversal.iter().map(|x| g.get(x).copied().unwrap_or(0.0)).collect();
    let restricted_norm = l2(&values);
    let sums = q.coset_sums(&values);
    let target = sums.iter().copied().fold(0.0, f64::max);
    let ls = q.lattice_size();
    let mut added = vec![0.0; q.k()];
    for (coset, &s) in sums.iter().enumerate() {
        let deficit = target - s;
        if deficit <= 0.0 {
            continue;
        }
        let cells: Vec<usize> = (coset * ls..(coset + 1) * ls).filter(|&i| !inner[i]).collect();
        if cells.is_empty() {
            return Err(SynthesisError::NoAnnulus(coset));
        }
        let share = deficit / cells.len() as f64;
        for i in cells {
            values[i] += share;
        }
        added[coset] = deficit;
    }
    let norm = l2(&values);
    let norm_bound = (q.k() as f64).sqrt() * restricted_norm;
    Ok(Periodization {
        n,
        values,
        transversal,
        inner,
        restricted_norm,
        norm,
        norm_bound,
        norm_certified: norm <= norm_bound * (1.0 + 1e-12),
        added,
    })
}

pub(crate) fn l2(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::quotient_heat_solve;
    use crate::quotient::assemble_eigenbasis;
    use crate::specs;

    fn hex_basis(n: usize) -> EigenBasis {
        let g = Group::new(specs::hexagonal()).unwrap();
        assemble_eigenbasis(&QuotientGraph::new(&g, n).unwrap()).unwrap()
    }

    #[test]
    fn basis_function_has_indicator_coefficients() {
        let basis = hex_basis(2);
        let f = &basis.functions[3];
        let g: Vec<f64> = f.values.iter().map(|z| z.re).collect();
        // Real part mixes f with its conjugate partner; check the expansion instead.
        let c = coefficients(&basis, &g).unwrap();
        let nonzero = c.iter().filter(|z| z.norm() > 1e-10).count();
        assert!(nonzero <= 2);
    }

    #[test]
    fn constant_plan() {
        let basis = hex_basis(2);
        let g = vec![1.0; 8];
        let plan = make_plan(&basis, &g).unwrap();
        assert_eq!(plan.terms.len(), 1);
        let t = &plan.terms[0];
        assert!((t.c.re - 8f64.sqrt()).abs() < 1e-12);
        assert!(t.a.re > 0.0);
        assert!(t.q.iter().all(|&v| (v - t.q[0]).abs() < 1e-12 && v > 0.0));
        let group = basis.quotient.group().clone();
        for time in [0.0, 1.0, 5.0] {
            let u = synthesize(&basis, &plan, &mut KernelCache::new(&group, time, 1e-12)).unwrap();
            assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn zero_plan() {
        let basis = hex_basis(2);
        let plan = make_plan(&basis, &[0.0; 8]).unwrap();
        assert!(plan.terms.is_empty());
        assert_eq!(plan.b, Complex64::new(0.0, 0.0));
        let oracle = vec![0.0; 8];
        let group = basis.quotient.group().clone();
        let r = pos_comb_check(&basis, &plan, &oracle, &mut KernelCache::new(&group, 1.0, 1e-12), 1e-9).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn unequal_coset_sums_rejected() {
        let basis = hex_basis(2);
        let mut g = vec![0.0; 8];
        g[0] = 1.0;
        match coefficients(&basis, &g) {
            Err(SynthesisError::UnequalCosetSums { sum_a, sum_b, .. }) => assert_eq!((sum_a, sum_b), (1.0, 0.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synthesis_matches_spectral_solution() {
        let basis = hex_basis(2);
        // δ at the identity balanced by a constant on the other coset.
        let mut g = vec![0.0; 8];
        g[0] = 1.0;
        for v in &mut g[4..] {
            *v = 0.25;
        }
        let plan = make_plan(&basis, &g).unwrap();
        assert!(plan.b.re <= plan.b_bound + 1e-12);
        let group = basis.quotient.group().clone();
        for t in [0.0, 0.7, 2.0] {
            let mut cache = KernelCache::new(&group, t, 1e-13);
            let u = synthesize(&basis, &plan, &mut cache).unwrap();
            let exact = quotient_heat_solve(&basis, &g, t);
            for (a, b) in u.values.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
            }
            pos_comb_check(&basis, &plan, &exact, &mut cache, 1e-9).unwrap();
        }
    }

    #[test]
    fn periodize_delta() {
        let group = Group::new(specs::hexagonal()).unwrap();
        let q = QuotientGraph::new(&group, 6).unwrap();
        let g = BTreeMap::from([(group.identity(), 1.0)]);
        let p = periodize(&q, &g).unwrap();
        for s in q.coset_sums(&p.values) {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(p.values[0], 1.0);
        assert!(p.norm_certified && p.norm <= 2f64.sqrt());
        for (i, &inner) in p.inner.iter().enumerate() {
            if inner && i != 0 {
                assert_eq!(p.values[i], 0.0);
            }
        }
        assert!(periodize(&QuotientGraph::new(&group, 3).unwrap(), &g).is_err());
    }

    #[test]
    fn periodize_constant() {
        let group = Group::new(specs::hexagonal()).unwrap();
        let q = QuotientGraph::new(&group, 4).unwrap();
        let g: BTreeMap<Element, f64> = bfs_transversal(&q).into_iter().map(|x| (x, 2.5)).collect();
        let p = periodize(&q, &g).unwrap();
        assert!(p.values.iter().all(|&v| v == 2.5));
        assert_eq!(p.added, vec![0.0, 0.0]);
    }
}
