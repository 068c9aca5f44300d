//! Finite quotients `Φ_n = Φ / ⟨s^n : s ∈ S̃⟩`, characters of the lattice
//! quotient `(Z/n)^d`, and the joint eigenbasis of `Δ` and `Δ̃`.
//!
//! Because `S̃` spans `Z^d`, the subgroup `⟨s^n⟩` is `n·Z^d`, so elements of
//! `Φ_n` are pairs `(v mod n, f)` and `|Φ_n| = k·n^d`. Vertices are indexed
//! as `f·n^d + Σ v_i n^i`.
//!
//! For each character `χ` the space `V_χ = {g : g(s·x) = χ(s) g(x)}` is
//! `k`-dimensional and invariant under `Δ`. On `V_χ` the Abelian Laplacian
//! acts as the scalar `λ_χ = Σ_{s∈S̃} (χ(s) − 1)`, and `Δ` is a `k × k`
//! Hermitian block whose eigenvectors, extended by `χ`, give the basis
//! functions `f_{χ,j}`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Generators;
use crate::group::{Element, Group};
use crate::Complex64;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QuotientError {
    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(usize),
    #[error("quotient graph under S is disconnected ({reached} of {total} vertices reached)")]
    Disconnected { reached: usize, total: usize },
    #[error("Δ block for θ={theta:?} is not Hermitian (residual {residual:e})")]
    NotHermitian { theta: Vec<usize>, residual: f64 },
    #[error("λ_χ = {lambda} for θ={theta:?} violates λ_χ ≤ 0 with equality only at the trivial character")]
    BadLambdaChi { theta: Vec<usize>, lambda: f64 },
    #[error("Δ block for θ={theta:?} is not negative definite (eigenvalue {eigenvalue:e})")]
    NotNegativeDefinite { theta: Vec<usize>, eigenvalue: f64 },
    #[error("block eigenvectors for θ={theta:?} not orthonormal (residual {residual:e})")]
    NotOrthonormal { theta: Vec<usize>, residual: f64 },
    #[error("sup-norm bound violated for θ={theta:?}, j={j}: {sup} > {bound}")]
    SupNorm { theta: Vec<usize>, j: usize, sup: f64, bound: f64 },
    #[error("assembled eigenbasis is rank deficient (Gram residual {0:e})")]
    RankDeficient(f64),
    #[error("basis function (θ={theta:?}, j={j}) has eigen residual {residual:e}")]
    EigenResidual { theta: Vec<usize>, j: usize, residual: f64 },
    #[error("function has {got} values, quotient has {expected} vertices")]
    Length { got: usize, expected: usize },
}

/// The Cayley graphs of `Φ_n` under both generating sets.
#[derive(Clone, Debug)]
pub struct QuotientGraph {
    group: Group,
    n: usize,
    lattice_size: usize,
    full_adj: Vec<Vec<usize>>,
    abelian_adj: Vec<Vec<usize>>,
}

impl QuotientGraph {
    pub fn new(group: &Group, n: usize) -> Result<Self, QuotientError> {
        if n < 2 {
            return Err(QuotientError::InvalidModulus(n));
        }
        let d = group.d();
        let lattice_size = n.pow(d as u32);
        let mut q = QuotientGraph {
            group: group.clone(),
            n,
            lattice_size,
            full_adj: Vec::new(),
            abelian_adj: Vec::new(),
        };
        let total = q.len();
        let adj = |gens: &[Element]| -> Vec<Vec<usize>> {
            (0..total)
                .map(|i| {
                    let x = q.element(i);
                    gens.iter().map(|s| q.project(&group.multiply(&x, s))).collect()
                })
                .collect()
        };
        let full_adj = adj(group.s());
        let abelian_adj = adj(group.s_tilde());
        q.full_adj = full_adj;
        q.abelian_adj = abelian_adj;

        let mut seen = vec![false; total];
        seen[0] = true;
        let mut stack = vec![0];
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for &j in &q.full_adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
        if reached != total {
            return Err(QuotientError::Disconnected { reached, total });
        }
        Ok(q)
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.group.d()
    }

    /// Index `k` of the lattice.
    pub fn k(&self) -> usize {
        self.group.f_order()
    }

    /// `|Φ̃_n| = n^d`.
    pub fn lattice_size(&self) -> usize {
        self.lattice_size
    }

    /// `|Φ_n| = k·n^d`.
    pub fn len(&self) -> usize {
        self.k() * self.lattice_size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vertex index of `(residues, fidx)`; residues must lie in `0..n`.
    pub fn index_of(&self, residues: &[i64], fidx: usize) -> usize {
        let n = self.n as i64;
        let mut lin = 0usize;
        for &r in residues.iter().rev() {
            lin = lin * self.n + r.rem_euclid(n) as usize;
        }
        fidx * self.lattice_size + lin
    }

    /// The canonical representative `(v mod n, f)` of vertex `idx`.
    pub fn element(&self, idx: usize) -> Element {
        let fidx = idx / self.lattice_size;
        let mut lin = idx % self.lattice_size;
        let vec = (0..self.d())
            .map(|_| {
                let r = lin % self.n;
                lin /= self.n;
                r as i64
            })
            .collect();
        Element { vec, fidx }
    }

    /// `π_n(x)`.
    pub fn project(&self, x: &Element) -> usize {
        self.index_of(&x.vec, x.fidx)
    }

    /// Lattice class `v mod n` of a translation, as an index into `0..n^d`.
    pub fn lattice_class(&self, v: &[i64]) -> usize {
        self.index_of(v, 0)
    }

    /// Coset of `Φ̃_n` containing `idx`, i.e. its F-index.
    pub fn coset(&self, idx: usize) -> usize {
        idx / self.lattice_size
    }

    /// Vertex indices of the transversal `{(0, f)}`.
    pub fn transversal(&self) -> Vec<usize> {
        (0..self.k()).map(|f| f * self.lattice_size).collect()
    }

    pub fn neighbors(&self, view: Generators, idx: usize) -> &[usize] {
        match view {
            Generators::Full => &self.full_adj[idx],
            Generators::Abelian => &self.abelian_adj[idx],
        }
    }

    pub fn degree(&self, view: Generators) -> usize {
        match view {
            Generators::Full => self.group.s().len(),
            Generators::Abelian => self.group.s_tilde().len(),
        }
    }

    /// `Δu(x) = Σ_s (u(x·s) − u(x))` on `Φ_n`.
    pub fn laplacian<T: ComplexField<RealField = f64> + Copy>(&self, view: Generators, u: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                self.neighbors(view, i)
                    .iter()
                    .fold(T::zero(), |acc, &j| acc + (u[j] - u[i]))
            })
            .collect()
    }

    /// `Γ(u)(x) = Σ_s |u(x·s) − u(x)|²` on `Φ_n`.
    pub fn gamma(&self, view: Generators, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                self.neighbors(view, i)
                    .iter()
                    .map(|&j| (u[j] - u[i]).powi(2))
                    .sum()
            })
            .collect()
    }

    /// Dense real matrix of `Δ` on `Φ_n`.
    pub fn laplacian_matrix(&self, view: Generators) -> DMatrix<f64> {
        let m = self.len();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for &j in self.neighbors(view, i) {
                a[(i, j)] += 1.0;
                a[(i, i)] -= 1.0;
            }
        }
        a
    }

    /// All `n^d` characters, trivial character first.
    pub fn characters(&self) -> Vec<Character> {
        (0..self.lattice_size)
            .map(|lin| Character { theta: self.element(lin).vec.iter().map(|&r| r as usize).collect(), n: self.n })
            .collect()
    }

    /// Sum of `g` over each coset of `Φ̃_n`.
    pub fn coset_sums(&self, g: &[f64]) -> Vec<f64> {
        g.chunks(self.lattice_size).map(|c| c.iter().sum()).collect()
    }

    /// Lazily evaluated periodic lift `h ∘ π_n` of a function on `Φ_n`.
    pub fn lift<'a, T: Copy>(&'a self, values: &'a [T]) -> Result<PeriodicLift<'a, T>, QuotientError> {
        if values.len() != self.len() {
            return Err(QuotientError::Length { got: values.len(), expected: self.len() });
        }
        Ok(PeriodicLift { quotient: self, values })
    }
}

/// `h ∘ π_n` for `h : Φ_n → T`.
#[derive(Clone, Copy, Debug)]
pub struct PeriodicLift<'a, T> {
    quotient: &'a QuotientGraph,
    values: &'a [T],
}

impl<'a, T: Copy> PeriodicLift<'a, T> {
    pub fn quotient(&self) -> &'a QuotientGraph {
        self.quotient
    }

    pub fn values(&self) -> &'a [T] {
        self.values
    }

    pub fn eval(&self, x: &Element) -> T {
        self.values[self.quotient.project(x)]
    }
}

/// Multiplicative character `v ↦ exp(2πi⟨θ, v⟩ / n)` of `(Z/n)^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Character {
    pub theta: Vec<usize>,
    pub n: usize,
}

impl Character {
    pub fn is_trivial(&self) -> bool {
        self.theta.iter().all(|&t| t == 0)
    }

    /// `⟨θ, v⟩ mod n`, computed exactly.
    pub fn phase(&self, v: &[i64]) -> usize {
        let n = self.n as i128;
        let dot: i128 = self.theta.iter().zip(v).map(|(&t, &x)| t as i128 * x as i128).sum();
        dot.rem_euclid(n) as usize
    }

    pub fn eval(&self, v: &[i64]) -> Complex64 {
        let m = self.phase(v);
        Complex64::from_polar(1.0, 2.0 * PI * m as f64 / self.n as f64)
    }
}

/// `λ_χ = Σ_{s∈S̃} (χ(s) − 1)`. Real and non-positive for symmetric `S̃`.
pub fn lambda_chi(group: &Group, chi: &Character) -> f64 {
    let z: Complex64 = group
        .s_tilde()
        .iter()
        .map(|s| chi.eval(&s.vec) - Complex64::new(1.0, 0.0))
        .sum();
    debug_assert!(z.im.abs() <= 1e-14, "λ_χ has imaginary part {}", z.im);
    z.re
}

/// One eigenpair of a `Δ` block.
#[derive(Clone, Debug)]
pub struct BlockEigenpair {
    /// `λ_{χ,j}`.
    pub lambda: f64,
    /// Values of `f_{χ,j}` on the transversal `(0, f)`, normalized so the
    /// extension to `Φ_n` has unit norm.
    pub transversal: Vec<Complex64>,
    /// `β_{χ,j} = λ_{χ,j} / λ_χ`; absent for the trivial character and `j ≥ 2`.
    pub beta: Option<f64>,
    pub sup_norm: f64,
}

/// Spectral data of `Δ` restricted to `V_χ`.
#[derive(Clone, Debug)]
pub struct ChiBlock {
    pub chi: Character,
    pub lambda_chi: f64,
    /// Matrix of `Δ` on `V_χ` in the basis `e_i(ṽ·x_j) = δ_ij χ(ṽ)`.
    pub matrix: DMatrix<Complex64>,
    pub hermitian_residual: f64,
    /// Sorted by eigenvalue, descending.
    pub eigs: Vec<BlockEigenpair>,
}

fn cmp_rounded(a: &[Complex64], b: &[Complex64]) -> Ordering {
    let key = |z: &Complex64| ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64);
    a.iter().map(key).cmp(b.iter().map(key))
}

/// Assemble and diagonalize the `Δ` block of `χ`.
pub fn chi_block(q: &QuotientGraph, chi: &Character) -> Result<ChiBlock, QuotientError> {
    let group = q.group();
    let k = q.k();
    let lam_chi = lambda_chi(group, chi);
    let trivial = chi.is_trivial();
    if lam_chi > HERMITIAN_TOL || (lam_chi.abs() <= HERMITIAN_TOL) != trivial {
        return Err(QuotientError::BadLambdaChi { theta: chi.theta.clone(), lambda: lam_chi });
    }

    // (0,i)·s = (u, j) contributes χ(u) at (i, j): g((0,i)·s) = χ(u) g(x_j).
    let mut a = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        let xi = Element::new(vec![0; q.d()], i);
        for s in group.s() {
            let y = group.multiply(&xi, s);
            a[(i, y.fidx)] += chi.eval(&y.vec);
            a[(i, i)] -= Complex64::new(1.0, 0.0);
        }
    }
    let hermitian_residual = (&a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if hermitian_residual > HERMITIAN_TOL {
        return Err(QuotientError::NotHermitian { theta: chi.theta.clone(), residual: hermitian_residual });
    }
    let herm = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..k)
        .map(|j| {
            let col: Vec<Complex64> = eig.eigenvectors.column(j).iter().copied().collect();
            (eig.eigenvalues[j], normalize_phase(col))
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        if (la - lb).abs() <= 1e-9 {
            cmp_rounded(va, vb)
        } else {
            lb.partial_cmp(la).expect("finite eigenvalues")
        }
    });

    if trivial {
        // Connectedness makes 0 a simple eigenvalue of the trivial block with
        // constant eigenvector; pin it exactly and project it out of the rest.
        let c = Complex64::new(1.0 / (k as f64).sqrt(), 0.0);
        pairs[0] = (0.0, vec![c; k]);
        for j in 1..k {
            let (head, tail) = pairs.split_at_mut(j);
            let v = &mut tail[0].1;
            for (_, u) in head.iter() {
                let dot: Complex64 = v.iter().zip(u).map(|(x, y)| x * y.conj()).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= Complex64::new(norm, 0.0);
            }
        }
    }

    let mut ortho = 0.0f64;
    for (i, (_, u)) in pairs.iter().enumerate() {
        for (j, (_, v)) in pairs.iter().enumerate() {
            let dot: Complex64 = u.iter().zip(v).map(|(x, y)| x * y.conj()).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot - Complex64::new(target, 0.0)).norm());
        }
    }
    if ortho > ORTHONORMAL_TOL {
        return Err(QuotientError::NotOrthonormal { theta: chi.theta.clone(), residual: ortho });
    }

    let scale = 1.0 / (q.lattice_size() as f64).sqrt();
    let bound = (k as f64 / q.len() as f64).sqrt();
    let mut eigs = Vec::with_capacity(k);
    for (j, (lambda, v)) in pairs.into_iter().enumerate() {
        let must_be_negative = !trivial || j > 0;
        if must_be_negative && lambda >= -HERMITIAN_TOL {
            return Err(QuotientError::NotNegativeDefinite { theta: chi.theta.clone(), eigenvalue: lambda });
        }
        let transversal: Vec<Complex64> = v.iter().map(|z| z * scale).collect();
        let sup_norm = transversal.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if sup_norm > bound + 1e-12 {
            return Err(QuotientError::SupNorm { theta: chi.theta.clone(), j: j + 1, sup: sup_norm, bound });
        }
        let beta = match (trivial, j) {
            (true, 0) => Some(1.0),
            (true, _) => None,
            (false, _) => Some(lambda / lam_chi),
        };
        eigs.push(BlockEigenpair { lambda, transversal, beta, sup_norm });
    }
    Ok(ChiBlock { chi: chi.clone(), lambda_chi: lam_chi, matrix: a, hermitian_residual, eigs })
}

/// Rotate `v` so its first non-negligible entry is real and positive.
fn normalize_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(p) = v.iter().find(|z| z.norm() > 1e-8 * max.max(1e-300)) {
        let rot = p.conj() / p.norm();
        for z in &mut v {
            *z *= rot;
        }
    }
    v
}

/// One joint eigenfunction `f_{χ,j}` on `Φ_n`.
#[derive(Clone, Debug)]
pub struct BasisFunction {
    /// Index into [`EigenBasis::characters`].
    pub chi: usize,
    /// 1-based position within the block.
    pub j: usize,
    pub lambda: f64,
    pub lambda_chi: f64,
    pub beta: Option<f64>,
    pub sup_norm: f64,
    pub values: Vec<Complex64>,
}

impl BasisFunction {
    /// True for `f_{𝟙,j}` with `j ≥ 2`, the functions the synthesis excludes.
    pub fn is_excluded(&self) -> bool {
        self.beta.is_none()
    }
}

/// Orthonormal basis `{f_{χ,j}}` of functions on `Φ_n`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub quotient: QuotientGraph,
    pub characters: Vec<Character>,
    pub blocks: Vec<ChiBlock>,
    pub functions: Vec<BasisFunction>,
    pub gram_residual: f64,
    pub eigen_residual: f64,
}

/// Extend transversal values to `Φ_n` by `g((v, i)) = χ(v) g((0, i))`.
pub fn extend_from_transversal(q: &QuotientGraph, chi: &Character, transversal: &[Complex64]) -> Vec<Complex64> {
    (0..q.len())
        .map(|idx| {
            let x = q.element(idx);
            chi.eval(&x.vec) * transversal[x.fidx]
        })
        .collect()
}

/// Build every `χ` block and the full orthonormal eigenbasis, checking the
/// Gram matrix and eigen residuals on the whole quotient.
pub fn assemble_eigenbasis(q: &QuotientGraph) -> Result<EigenBasis, QuotientError> {
    let characters = q.characters();
    let blocks: Vec<ChiBlock> = characters
        .par_iter()
        .map(|chi| chi_block(q, chi))
        .collect::<Result<_, _>>()?;
    let functions: Vec<BasisFunction> = blocks
        .par_iter()
        .enumerate()
        .flat_map_iter(|(c, block)| {
            block.eigs.iter().enumerate().map(move |(j, e)| BasisFunction {
                chi: c,
                j: j + 1,
                lambda: e.lambda,
                lambda_chi: block.lambda_chi,
                beta: e.beta,
                sup_norm: e.sup_norm,
                values: extend_from_transversal(q, &block.chi, &e.transversal),
            })
        })
        .collect();

    let eigen_residual = functions
        .par_iter()
        .map(|f| {
            let lap = q.laplacian(Generators::Full, &f.values);
            lap.iter()
                .zip(&f.values)
                .map(|(l, v)| (l - v * f.lambda).norm())
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>();
    if let Some((i, &r)) = eigen_residual
        .iter()
        .enumerate()
        .find(|(_, &r)| r > EIGEN_RESIDUAL_TOL)
    {
        let f = &functions[i];
        return Err(QuotientError::EigenResidual {
            theta: characters[f.chi].theta.clone(),
            j: f.j,
            residual: r,
        });
    }
    let eigen_residual = eigen_residual.into_iter().fold(0.0, f64::max);

    let gram_residual = (0..functions.len())
        .into_par_iter()
        .map(|a| {
            let fa = &functions[a].values;
            (a..functions.len())
                .map(|b| {
                    let dot: Complex64 = fa.iter().zip(&functions[b].values).map(|(x, y)| x * y.conj()).sum();
                    let target = if a == b { 1.0 } else { 0.0 };
                    (dot - Complex64::new(target, 0.0)).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    if gram_residual > ORTHONORMAL_TOL || functions.len() != q.len() {
        return Err(QuotientError::RankDeficient(gram_residual));
    }
    Ok(EigenBasis { quotient: q.clone(), characters, blocks, functions, gram_residual, eigen_residual })
}

impl EigenBasis {
    /// `⟨g, h⟩ = Σ_x g(x) conj(h(x))`.
    pub fn inner(g: &[Complex64], h: &[Complex64]) -> Complex64 {
        g.iter().zip(h).map(|(a, b)| a * b.conj()).sum()
    }

    /// Coefficients `⟨g, f_{χ,j}⟩` of a real function, in basis order.
    pub fn expand_real(&self, g: &[f64]) -> Vec<Complex64> {
        self.functions
            .iter()
            .map(|f| g.iter().zip(&f.values).map(|(a, b)| b.conj() * *a).sum())
            .collect()
    }

    /// Smallest `β_{χ,j}` over non-trivial characters.
    pub fn min_beta(&self) -> Option<f64> {
        self.functions
            .iter()
            .filter(|f| !self.characters[f.chi].is_trivial())
            .filter_map(|f| f.beta)
            .min_by(|a, b| a.partial_cmp(b).expect("finite"))
    }
}
