//! Virtually Abelian groups presented as extensions of a finite group `F` by `Z^d`.
//!
//! An element is a pair `(v, f)` with `v ∈ Z^d` and `f` an index into the
//! multiplication table of `F`. The group law is
//!
//! ```text
//! (v, f) · (w, g) = (v + φ_f(w) + τ(f, g), f g)
//! ```
//!
//! where `φ_f ∈ GL(d, Z)` is the action of `F` on the lattice and `τ` is a
//! normalized 2-cocycle. Split extensions (semidirect products such as the
//! hexagonal lattice) have `τ ≡ 0`; non-split ones (glide reflections) do not.
//!
//! The F-index `0` is always the identity of `F`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{invariant_factors, IntMatrix};

/// A group element `(v, f)`.
///
/// Ordering is lexicographic on `vec`, then on `fidx`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element {
    pub vec: Vec<i64>,
    pub fidx: usize,
}

impl Element {
    pub fn new(vec: Vec<i64>, fidx: usize) -> Self {
        Element { vec, fidx }
    }

    /// The identity `(0, 1)` of a rank-`d` group.
    pub fn identity(d: usize) -> Self {
        Element { vec: vec![0; d], fidx: 0 }
    }

    /// A pure translation `(v, 1)`.
    pub fn translation(vec: Vec<i64>) -> Self {
        Element { vec, fidx: 0 }
    }

    pub fn is_translation(&self) -> bool {
        self.fidx == 0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.vec.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ";{})", self.fidx)
    }
}

/// Serialized description of a group and its two generating sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default)]
    pub name: String,
    pub d: usize,
    /// `f_table[f][g]` is the index of `f g`.
    pub f_table: Vec<Vec<usize>>,
    /// `action[f]` is the integer matrix of `φ_f`, row-major.
    pub action: Vec<IntMatrix>,
    /// `cocycle[f][g]` is `τ(f, g) ∈ Z^d`.
    pub cocycle: Vec<Vec<Vec<i64>>>,
    #[serde(rename = "S")]
    pub s: Vec<Element>,
    #[serde(rename = "S_tilde")]
    pub s_tilde: Vec<Element>,
}

impl GroupSpec {
    pub fn f_order(&self) -> usize {
        self.f_table.len()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("group spec serializes")
    }
}

/// Which generating set a violation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenSet {
    Full,
    Abelian,
}

impl fmt::Display for GenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenSet::Full => write!(f, "S"),
            GenSet::Abelian => write!(f, "S̃"),
        }
    }
}

/// A violated hypothesis on a [`GroupSpec`], with a witness.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("malformed spec: {0}")]
    Shape(String),
    #[error("index 0 is not the identity of F (row/column {0} disagrees)")]
    IdentityNotFirst(usize),
    #[error("F table not associative at ({0}, {1}, {2})")]
    NotAssociative(usize, usize, usize),
    #[error("F element {0} has no two-sided inverse")]
    MissingInverse(usize),
    #[error("action of F element {f} is not in GL(d,Z): det = {det}")]
    NotUnimodular { f: usize, det: i64 },
    #[error("action of the identity is not the identity matrix")]
    ActionNotTrivialAtIdentity,
    #[error("action is not a homomorphism: φ_{f} φ_{g} ≠ φ_{fg}", fg = .product)]
    ActionNotHomomorphism { f: usize, g: usize, product: usize },
    #[error("cocycle not normalized at ({0}, {1})")]
    CocycleNotNormalized(usize, usize),
    #[error("2-cocycle condition fails at ({0}, {1}, {2})")]
    CocycleCondition(usize, usize, usize),
    #[error("{which} is empty")]
    EmptyGeneratingSet { which: GenSet },
    #[error("{which} is not symmetric: inverse of {element} missing")]
    NotSymmetric { which: GenSet, element: Element },
    #[error("S̃ element {0} is not a translation")]
    STildeOutsideLattice(Element),
    #[error("S̃ not invariant under φ_{f}: {element} ↦ {image}")]
    STildeNotInvariant { f: usize, element: Element, image: Element },
    #[error("S̃ not generating Z^d: invariant factors {0:?}")]
    STildeNotGenerating(Vec<i64>),
    #[error("S does not generate the group: {0}")]
    SNotGenerating(String),
    #[error("integer overflow while checking {0}")]
    Overflow(String),
}

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("invalid group spec: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("integer overflow in group law")]
    Overflow,
    #[error("conjugation requires an element of the lattice subgroup, got {0}")]
    NotInLattice(Element),
}

fn mat_vec(m: &IntMatrix, v: &[i64]) -> Option<Vec<i64>> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .try_fold(0i64, |acc, (a, b)| acc.checked_add(a.checked_mul(*b)?))
        })
        .collect()
}

fn vec_add(a: &[i64], b: &[i64]) -> Option<Vec<i64>> {
    a.iter().zip(b).map(|(x, y)| x.checked_add(*y)).collect()
}

fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> Option<IntMatrix> {
    let n = a.len();
    let mut out = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0i64;
            for (l, bl) in b.iter().enumerate() {
                acc = acc.checked_add(a[i][l].checked_mul(bl[j])?)?;
            }
            out[i][j] = acc;
        }
    }
    Some(out)
}

fn determinant(m: &IntMatrix) -> Option<i64> {
    // Bareiss fraction-free elimination.
    let n = m.len();
    if n == 0 {
        return Some(1);
    }
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let swap = (k + 1..n).find(|&i| a[i][k] != 0)?;
            a.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    i64::try_from(sign * a[n - 1][n - 1]).ok()
}

/// Run every check on `spec` and return all violations found.
///
/// Structural problems (wrong dimensions, out-of-range indices) are reported
/// alone, since the algebraic checks cannot be evaluated on a malformed spec.
pub fn validate_spec(spec: &GroupSpec) -> Vec<Violation> {
    let shape = shape_violations(spec);
    if !shape.is_empty() {
        return shape;
    }
    let k = spec.f_order();
    let d = spec.d;
    let t = &spec.f_table;
    let mut out = Vec::new();

    for f in 0..k {
        if t[0][f] != f || t[f][0] != f {
            out.push(Violation::IdentityNotFirst(f));
        }
    }
    'assoc: for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                if t[t[a][b]][c] != t[a][t[b][c]] {
                    out.push(Violation::NotAssociative(a, b, c));
                    break 'assoc;
                }
            }
        }
    }
    for f in 0..k {
        if !(0..k).any(|g| t[f][g] == 0 && t[g][f] == 0) {
            out.push(Violation::MissingInverse(f));
        }
    }
    if !out.is_empty() {
        return out;
    }

    let ident: IntMatrix = (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect();
    if spec.action[0] != ident {
        out.push(Violation::ActionNotTrivialAtIdentity);
    }
    for (f, m) in spec.action.iter().enumerate() {
        match determinant(m) {
            Some(det) if det.abs() == 1 => {}
            Some(det) => out.push(Violation::NotUnimodular { f, det }),
            None => out.push(Violation::Overflow(format!("det φ_{f}"))),
        }
    }
    for f in 0..k {
        for g in 0..k {
            let fg = t[f][g];
            match mat_mul(&spec.action[f], &spec.action[g]) {
                Some(p) if p == spec.action[fg] => {}
                Some(_) => out.push(Violation::ActionNotHomomorphism { f, g, product: fg }),
                None => out.push(Violation::Overflow(format!("φ_{f} φ_{g}"))),
            }
        }
    }
    let zero = vec![0i64; d];
    for f in 0..k {
        if spec.cocycle[0][f] != zero || spec.cocycle[f][0] != zero {
            out.push(Violation::CocycleNotNormalized(0, f));
        }
    }
    'cocycle: for f in 0..k {
        for g in 0..k {
            for h in 0..k {
                let lhs = mat_vec(&spec.action[f], &spec.cocycle[g][h])
                    .and_then(|v| vec_add(&v, &spec.cocycle[f][t[g][h]]));
                let rhs = vec_add(&spec.cocycle[f][g], &spec.cocycle[t[f][g]][h]);
                match (lhs, rhs) {
                    (Some(l), Some(r)) if l == r => {}
                    (Some(_), Some(_)) => {
                        out.push(Violation::CocycleCondition(f, g, h));
                        break 'cocycle;
                    }
                    _ => out.push(Violation::Overflow(format!("cocycle at ({f},{g},{h})"))),
                }
            }
        }
    }
    if !out.is_empty() {
        return out;
    }

    // From here on the group law is associative, so Group arithmetic is sound.
    let group = Group::from_spec_unchecked(spec.clone());
    for (which, set) in [(GenSet::Full, &spec.s), (GenSet::Abelian, &spec.s_tilde)] {
        if set.is_empty() {
            out.push(Violation::EmptyGeneratingSet { which });
            continue;
        }
        for x in set {
            match group.try_invert(x) {
                Ok(inv) if set.contains(&inv) => {}
                Ok(_) => out.push(Violation::NotSymmetric { which, element: x.clone() }),
                Err(_) => out.push(Violation::Overflow(format!("inverse of {x}"))),
            }
        }
    }
    let mut lattice_ok = true;
    for s in &spec.s_tilde {
        if !s.is_translation() {
            out.push(Violation::STildeOutsideLattice(s.clone()));
            lattice_ok = false;
        }
    }
    if lattice_ok && !spec.s_tilde.is_empty() {
        for f in 0..k {
            for s in &spec.s_tilde {
                let Some(v) = mat_vec(&spec.action[f], &s.vec) else {
                    out.push(Violation::Overflow(format!("φ_{f}({s})")));
                    continue;
                };
                let image = Element::translation(v);
                if !spec.s_tilde.contains(&image) {
                    out.push(Violation::STildeNotInvariant { f, element: s.clone(), image });
                }
            }
        }
        let cols: Vec<Vec<i64>> = spec.s_tilde.iter().map(|s| s.vec.clone()).collect();
        let factors = invariant_factors(&transpose(&cols, d));
        if factors.len() != d || factors.iter().any(|&x| x != 1) {
            out.push(Violation::STildeNotGenerating(factors));
        }
    }
    if !spec.s.is_empty() {
        if let Some(v) = generation_violation(&group) {
            out.push(v);
        }
    }
    out
}

fn transpose(cols: &[Vec<i64>], d: usize) -> IntMatrix {
    (0..d).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

fn shape_violations(spec: &GroupSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = spec.f_order();
    let d = spec.d;
    if d == 0 {
        out.push(Violation::Shape("d must be positive".into()));
    }
    if k == 0 {
        out.push(Violation::Shape("F must be non-empty".into()));
    }
    for (i, row) in spec.f_table.iter().enumerate() {
        if row.len() != k || row.iter().any(|&x| x >= k) {
            out.push(Violation::Shape(format!("f_table row {i} is not a row of {k} indices < {k}")));
        }
    }
    if spec.action.len() != k {
        out.push(Violation::Shape(format!("action has {} matrices, expected {k}", spec.action.len())));
    }
    for (f, m) in spec.action.iter().enumerate() {
        if m.len() != d || m.iter().any(|r| r.len() != d) {
            out.push(Violation::Shape(format!("action[{f}] is not {d}x{d}")));
        }
    }
    if spec.cocycle.len() != k || spec.cocycle.iter().any(|r| r.len() != k) {
        out.push(Violation::Shape(format!("cocycle is not {k}x{k}")));
    } else {
        for (f, row) in spec.cocycle.iter().enumerate() {
            for (g, v) in row.iter().enumerate() {
                if v.len() != d {
                    out.push(Violation::Shape(format!("cocycle[{f}][{g}] has length {}", v.len())));
                }
            }
        }
    }
    for (which, set) in [(GenSet::Full, &spec.s), (GenSet::Abelian, &spec.s_tilde)] {
        for x in set {
            if x.vec.len() != d || x.fidx >= k {
                out.push(Violation::Shape(format!("{which} element {x} has wrong shape")));
            }
        }
    }
    out
}

/// Schreier-generator test that `S` generates the whole group: the images of
/// `S` must generate `F`, and the Schreier generators `r_f s r_{f s}⁻¹` must
/// span `Z^d`.
fn generation_violation(group: &Group) -> Option<Violation> {
    let k = group.f_order();
    let mut reps: Vec<Option<Element>> = vec![None; k];
    reps[0] = Some(group.identity());
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        let r = reps[f].clone().expect("visited");
        for s in group.s() {
            let g = group.f_product(f, s.fidx);
            if reps[g].is_none() {
                reps[g] = Some(group.try_multiply(&r, s).ok()?);
                queue.push_back(g);
            }
        }
    }
    if let Some(missing) = reps.iter().position(Option::is_none) {
        return Some(Violation::SNotGenerating(format!(
            "F element {missing} is not reached by the images of S"
        )));
    }
    let reps: Vec<Element> = reps.into_iter().map(Option::unwrap).collect();
    let mut cols = Vec::new();
    for r in &reps {
        for s in group.s() {
            let rs = group.try_multiply(r, s).ok()?;
            let back = group.try_invert(&reps[rs.fidx]).ok()?;
            let y = group.try_multiply(&rs, &back).ok()?;
            debug_assert!(y.is_translation());
            if y.vec.iter().any(|&c| c != 0) {
                cols.push(y.vec);
            }
        }
    }
    let factors = invariant_factors(&transpose(&cols, group.d()));
    if factors.len() != group.d() || factors.iter().any(|&x| x != 1) {
        return Some(Violation::SNotGenerating(format!(
            "lattice part has invariant factors {factors:?}"
        )));
    }
    None
}

/// A validated group. Immutable; all arithmetic is exact.
#[derive(Clone, Debug)]
pub struct Group {
    spec: GroupSpec,
    f_inverse: Vec<usize>,
}

impl Group {
    pub fn new(spec: GroupSpec) -> Result<Self, GroupError> {
        let violations = validate_spec(&spec);
        if !violations.is_empty() {
            return Err(GroupError::Invalid(violations));
        }
        Ok(Self::from_spec_unchecked(spec))
    }

    fn from_spec_unchecked(spec: GroupSpec) -> Self {
        let k = spec.f_order();
        let f_inverse = (0..k)
            .map(|f| (0..k).find(|&g| spec.f_table[f][g] == 0).unwrap_or(0))
            .collect();
        Group { spec, f_inverse }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    /// Index `k` of the lattice subgroup.
    pub fn f_order(&self) -> usize {
        self.spec.f_order()
    }

    pub fn s(&self) -> &[Element] {
        &self.spec.s
    }

    pub fn s_tilde(&self) -> &[Element] {
        &self.spec.s_tilde
    }

    pub fn identity(&self) -> Element {
        Element::identity(self.spec.d)
    }

    pub fn f_product(&self, f: usize, g: usize) -> usize {
        self.spec.f_table[f][g]
    }

    pub fn f_inverse(&self, f: usize) -> usize {
        self.f_inverse[f]
    }

    /// `φ_f(v)`.
    pub fn act(&self, f: usize, v: &[i64]) -> Result<Vec<i64>, GroupError> {
        mat_vec(&self.spec.action[f], v).ok_or(GroupError::Overflow)
    }

    pub fn cocycle(&self, f: usize, g: usize) -> &[i64] {
        &self.spec.cocycle[f][g]
    }

    pub fn try_multiply(&self, a: &Element, b: &Element) -> Result<Element, GroupError> {
        let moved = self.act(a.fidx, &b.vec)?;
        let vec = vec_add(&a.vec, &moved)
            .and_then(|v| vec_add(&v, self.cocycle(a.fidx, b.fidx)))
            .ok_or(GroupError::Overflow)?;
        Ok(Element { vec, fidx: self.f_product(a.fidx, b.fidx) })
    }

    /// Group product. Panics on 64-bit overflow, which cannot happen for the
    /// coordinate ranges reachable at desk scale.
    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        self.try_multiply(a, b).expect("integer overflow in group law")
    }

    pub fn try_invert(&self, a: &Element) -> Result<Element, GroupError> {
        // (v,f)⁻¹ = (−φ_{f⁻¹}(v + τ(f, f⁻¹)), f⁻¹)
        let finv = self.f_inverse(a.fidx);
        let shifted = vec_add(&a.vec, self.cocycle(a.fidx, finv)).ok_or(GroupError::Overflow)?;
        let moved = self.act(finv, &shifted)?;
        let vec = moved
            .iter()
            .map(|c| c.checked_neg())
            .collect::<Option<Vec<_>>>()
            .ok_or(GroupError::Overflow)?;
        Ok(Element { vec, fidx: finv })
    }

    pub fn invert(&self, a: &Element) -> Element {
        self.try_invert(a).expect("integer overflow in group inverse")
    }

    /// `x⁻¹ y x` for `y` in the lattice subgroup.
    pub fn conjugate(&self, y: &Element, x: &Element) -> Result<Element, GroupError> {
        if !y.is_translation() {
            return Err(GroupError::NotInLattice(y.clone()));
        }
        let xinv = self.try_invert(x)?;
        let yx = self.try_multiply(y, x)?;
        self.try_multiply(&xinv, &yx)
    }
}
