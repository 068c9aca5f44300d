//! Cayley graphs `G = Cay(Φ, S)` and `G̃ = Cay(Φ, S̃)` on the infinite group.
//!
//! Functions live on finite balls ([`BallFunction`]) and every operator
//! application shrinks the region on which the result is exact. The shrinkage
//! is tracked explicitly so downstream error analysis never sees padded zeros.

use std::collections::{HashMap, VecDeque};

use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{Element, Group};

/// Which generating set defines the edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generators {
    /// Right multiplication by `S` (the graph `G`).
    Full,
    /// Right multiplication by `S̃` (the graph `G̃`).
    Abelian,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{target} not reachable within radius {radius} in the {view:?} view")]
    Unreachable { target: Element, radius: usize, view: Generators },
}

#[derive(Clone, Copy, Debug)]
pub struct GraphView<'a> {
    group: &'a Group,
    generators: Generators,
}

impl<'a> GraphView<'a> {
    pub fn new(group: &'a Group, generators: Generators) -> Self {
        GraphView { group, generators }
    }

    pub fn full(group: &'a Group) -> Self {
        Self::new(group, Generators::Full)
    }

    pub fn abelian(group: &'a Group) -> Self {
        Self::new(group, Generators::Abelian)
    }

    pub fn group(&self) -> &'a Group {
        self.group
    }

    pub fn kind(&self) -> Generators {
        self.generators
    }

    pub fn generators(&self) -> &'a [Element] {
        match self.generators {
            Generators::Full => self.group.s(),
            Generators::Abelian => self.group.s_tilde(),
        }
    }

    pub fn degree(&self) -> usize {
        self.generators().len()
    }

    /// `[x·s : s ∈ generators]`, in generator order, with multiplicity.
    pub fn neighbors(&self, x: &Element) -> Vec<Element> {
        self.generators()
            .iter()
            .map(|s| self.group.multiply(x, s))
            .collect()
    }

    /// BFS ball with distances, sorted by `(distance, element)`.
    pub fn ball_with_distances(&self, center: &Element, radius: usize) -> Vec<(Element, usize)> {
        self.ball_capped(center, radius, usize::MAX)
            .expect("uncapped enumeration")
    }

    /// As [`Self::ball_with_distances`], giving up with `None` once more than
    /// `cap` elements have been found.
    pub fn ball_capped(&self, center: &Element, radius: usize, cap: usize) -> Option<Vec<(Element, usize)>> {
        let mut seen: HashMap<Element, usize> = HashMap::from([(center.clone(), 0)]);
        let mut out = vec![(center.clone(), 0)];
        let mut frontier = vec![center.clone()];
        for dist in 1..=radius {
            let mut next = Vec::new();
            for x in &frontier {
                for y in self.neighbors(x) {
                    if !seen.contains_key(&y) {
                        seen.insert(y.clone(), dist);
                        next.push(y);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort();
            out.extend(next.iter().cloned().map(|y| (y, dist)));
            if out.len() > cap {
                return None;
            }
            frontier = next;
        }
        Some(out)
    }

    /// Elements within graph distance `radius` of `center`, sorted by
    /// `(distance, vec, fidx)`.
    pub fn ball(&self, center: &Element, radius: usize) -> Vec<Element> {
        self.ball_with_distances(center, radius)
            .into_iter()
            .map(|(x, _)| x)
            .collect()
    }

    /// Word length of `target` from the identity, searching up to `max_radius`.
    pub fn word_length(&self, target: &Element, max_radius: usize) -> Result<usize, GraphError> {
        let id = self.group.identity();
        let mut seen = HashMap::from([(id.clone(), 0usize)]);
        let mut queue = VecDeque::from([id]);
        while let Some(x) = queue.pop_front() {
            let dist = seen[&x];
            if &x == target {
                return Ok(dist);
            }
            if dist == max_radius {
                continue;
            }
            for y in self.neighbors(&x) {
                if !seen.contains_key(&y) {
                    seen.insert(y.clone(), dist + 1);
                    queue.push_back(y);
                }
            }
        }
        Err(GraphError::Unreachable { target: target.clone(), radius: max_radius, view: self.generators })
    }

    /// How many steps of this view one step of `op` can take: the maximum word
    /// length of `op`'s generators over this view's generators.
    pub fn reach_of(&self, op: Generators) -> Result<usize, GraphError> {
        if op == self.generators {
            return Ok(1);
        }
        let other = GraphView::new(self.group, op);
        other
            .generators()
            .iter()
            .map(|s| self.word_length(s, 64))
            .try_fold(0, |acc, r| r.map(|r| acc.max(r)))
    }
}

/// Value returned by [`BallFunction::lookup`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lookup<T> {
    pub value: T,
    /// True when the point is outside the valid region and `value` is a
    /// placeholder zero.
    pub truncated: bool,
}

/// A function known exactly on a ball of the chosen view.
#[derive(Clone, Debug)]
pub struct BallFunction<T> {
    view: Generators,
    center: Element,
    radius: usize,
    points: Vec<Element>,
    dist: Vec<usize>,
    index: HashMap<Element, usize>,
    values: Vec<T>,
    exhausted: bool,
}

impl<T: ComplexField<RealField = f64> + Copy> BallFunction<T> {
    pub fn from_fn(
        view: &GraphView<'_>,
        center: &Element,
        radius: usize,
        f: impl Fn(&Element) -> T,
    ) -> Self {
        let pts = view.ball_with_distances(center, radius);
        let values = pts.iter().map(|(x, _)| f(x)).collect();
        Self::from_parts(view.kind(), center.clone(), radius, pts, values)
    }

    pub(crate) fn from_parts(
        view: Generators,
        center: Element,
        radius: usize,
        pts: Vec<(Element, usize)>,
        values: Vec<T>,
    ) -> Self {
        let (points, dist): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
        let index = points.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect();
        BallFunction { view, center, radius, points, dist, index, values, exhausted: false }
    }

    fn exhausted(view: Generators, center: Element) -> Self {
        BallFunction {
            view,
            center,
            radius: 0,
            points: Vec::new(),
            dist: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
            exhausted: true,
        }
    }

    pub fn view(&self) -> Generators {
        self.view
    }

    pub fn center(&self) -> &Element {
        &self.center
    }

    /// Radius of the region where values are exact.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// True when repeated operator application consumed the whole ball.
    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Element] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn distance(&self, i: usize) -> usize {
        self.dist[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Element, T)> + '_ {
        self.points.iter().zip(self.values.iter().copied())
    }

    pub fn get(&self, x: &Element) -> Option<T> {
        self.index.get(x).map(|&i| self.values[i])
    }

    pub fn lookup(&self, x: &Element) -> Lookup<T> {
        match self.get(x) {
            Some(value) => Lookup { value, truncated: false },
            None => Lookup { value: T::zero(), truncated: true },
        }
    }

    /// Restrict to the sub-ball of radius `radius` (no-op if larger).
    pub fn restrict(&self, radius: usize) -> Self {
        let keep = self.dist.partition_point(|&d| d <= radius);
        let pts = self.points[..keep]
            .iter()
            .cloned()
            .zip(self.dist[..keep].iter().copied())
            .collect();
        Self::from_parts(
            self.view,
            self.center.clone(),
            radius.min(self.radius),
            pts,
            self.values[..keep].to_vec(),
        )
    }

    fn apply_local(
        &self,
        op: &GraphView<'_>,
        local: impl Fn(T, &mut dyn Iterator<Item = T>) -> T,
    ) -> Result<Self, GraphError> {
        let host = GraphView::new(op.group(), self.view);
        let reach = host.reach_of(op.kind())?;
        if self.exhausted || self.radius < reach {
            return Ok(Self::exhausted(self.view, self.center.clone()));
        }
        let radius = self.radius - reach;
        let keep = self.dist.partition_point(|&d| d <= radius);
        let gens = op.generators();
        let group = op.group();
        let values = self.points[..keep]
            .iter()
            .zip(&self.values[..keep])
            .map(|(x, &fx)| {
                let mut nbrs = gens.iter().map(|s| {
                    self.get(&group.multiply(x, s))
                        .expect("neighbor inside the tracked ball")
                });
                local(fx, &mut nbrs)
            })
            .collect();
        let pts = self.points[..keep]
            .iter()
            .cloned()
            .zip(self.dist[..keep].iter().copied())
            .collect();
        Ok(Self::from_parts(self.view, self.center.clone(), radius, pts, values))
    }

    /// `Δf(x) = Σ_s (f(x·s) − f(x))` for the generators of `op`.
    pub fn laplacian(&self, op: &GraphView<'_>) -> Result<Self, GraphError> {
        self.apply_local(op, |fx, nbrs| nbrs.fold(T::zero(), |acc, fy| acc + (fy - fx)))
    }

    /// `Γ(f)(x) = Σ_s |f(x·s) − f(x)|²`, returned as a complex-typed function
    /// with zero imaginary part.
    pub fn gamma(&self, op: &GraphView<'_>) -> Result<Self, GraphError> {
        self.apply_local(op, |fx, nbrs| {
            let r: f64 = nbrs.map(|fy| (fy - fx).modulus_squared()).sum();
            T::from_real(r)
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = f(*v);
        }
        out
    }
}

/// `Δf` on the view `op`.
pub fn laplacian_apply<T: ComplexField<RealField = f64> + Copy>(
    op: &GraphView<'_>,
    f: &BallFunction<T>,
) -> Result<BallFunction<T>, GraphError> {
    f.laplacian(op)
}

/// `Γ(f)` on the view `op`.
pub fn gamma<T: ComplexField<RealField = f64> + Copy>(
    op: &GraphView<'_>,
    f: &BallFunction<T>,
) -> Result<BallFunction<T>, GraphError> {
    f.gamma(op)
}

/// A shortest word over `S` (letters are indices into `S`) for one `t ∈ S̃`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub target: Element,
    pub letters: Vec<usize>,
}

/// Shortest `S`-words for every `t ∈ S̃` and the derived constant `K = r·M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordDecomposition {
    pub words: Vec<Word>,
    /// Longest word length.
    pub r: usize,
    /// Largest multiplicity of one letter across all words.
    pub m: usize,
    /// Index into `S` of a letter attaining `m` (smallest such index).
    pub max_letter: usize,
    pub k: usize,
}

/// Lexicographically least shortest words over `S` for each element of `S̃`.
pub fn word_decompositions(group: &Group, max_radius: usize) -> Result<WordDecomposition, GraphError> {
    let mut found: HashMap<Element, Vec<usize>> = HashMap::new();
    let id = group.identity();
    let mut seen: HashMap<Element, ()> = HashMap::from([(id.clone(), ())]);
    // Frontier kept in lexicographic order of words; expanding in that order
    // with letters in `S` order keeps the next frontier sorted as well, so the
    // first discovery of each element is its lex-least shortest word.
    let mut frontier: Vec<(Element, Vec<usize>)> = vec![(id, Vec::new())];
    let targets: Vec<&Element> = group.s_tilde().iter().collect();
    let pending = |found: &HashMap<Element, Vec<usize>>| targets.iter().any(|t| !found.contains_key(*t));
    let mut radius = 0;
    while pending(&found) && radius < max_radius && !frontier.is_empty() {
        let mut next = Vec::new();
        for (x, word) in &frontier {
            for (i, s) in group.s().iter().enumerate() {
                let y = group.multiply(x, s);
                if seen.insert(y.clone(), ()).is_none() {
                    let mut w = word.clone();
                    w.push(i);
                    if y.is_translation() && targets.contains(&&y) {
                        found.insert(y.clone(), w.clone());
                    }
                    next.push((y, w));
                }
            }
        }
        frontier = next;
        radius += 1;
    }
    let mut words = Vec::new();
    for t in group.s_tilde() {
        let letters = found.get(t).cloned().ok_or_else(|| GraphError::Unreachable {
            target: t.clone(),
            radius: max_radius,
            view: Generators::Full,
        })?;
        words.push(Word { target: t.clone(), letters });
    }
    let r = words.iter().map(|w| w.letters.len()).max().unwrap_or(0).max(1);
    let mut counts = vec![0usize; group.s().len()];
    for w in &words {
        for &l in &w.letters {
            counts[l] += 1;
        }
    }
    let m = counts.iter().copied().max().unwrap_or(0).max(1);
    let max_letter = counts.iter().position(|&c| c == m).unwrap_or(0);
    Ok(WordDecomposition { words, r, m, max_letter, k: r * m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specs;

    fn e(v: &[i64], f: usize) -> Element {
        Element::new(v.to_vec(), f)
    }

    #[test]
    fn hex_neighbors() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let id = g.identity();
        assert_eq!(
            GraphView::full(&g).neighbors(&id),
            vec![e(&[0, 0], 1), e(&[1, 0], 1), e(&[0, 1], 1)]
        );
        assert_eq!(
            GraphView::abelian(&g).neighbors(&id),
            vec![e(&[1, 0], 0), e(&[-1, 0], 0), e(&[0, 1], 0), e(&[0, -1], 0)]
        );
    }

    #[test]
    fn neighbor_relation_is_symmetric() {
        for spec in [specs::hexagonal(), specs::klein_bottle()] {
            let g = Group::new(spec).unwrap();
            for view in [GraphView::full(&g), GraphView::abelian(&g)] {
                for x in view.ball(&g.identity(), 3) {
                    for y in view.neighbors(&x) {
                        assert!(view.neighbors(&y).contains(&x));
                    }
                }
            }
        }
    }

    #[test]
    fn balls() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let full = GraphView::full(&g);
        assert_eq!(full.ball(&g.identity(), 0), vec![g.identity()]);
        assert_eq!(full.ball(&g.identity(), 1).len(), 4);
        // Honeycomb shells: 1, 3, 6, 9, 12, ...
        let sizes: Vec<usize> = (0..6).map(|r| full.ball(&g.identity(), r).len()).collect();
        assert_eq!(sizes, vec![1, 4, 10, 19, 31, 46]);
        let ab = GraphView::abelian(&g);
        // Z² with the 4 unit steps: 2r² + 2r + 1.
        for r in 0..6 {
            assert_eq!(ab.ball(&g.identity(), r).len(), 2 * r * r + 2 * r + 1);
        }
    }

    #[test]
    fn delta_laplacian_and_gamma() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let ab = GraphView::abelian(&g);
        let id = g.identity();
        let delta = BallFunction::<f64>::from_fn(&ab, &id, 3, |x| if x == &id { 1.0 } else { 0.0 });
        let lap = delta.laplacian(&ab).unwrap();
        assert_eq!(lap.radius(), 2);
        assert_eq!(lap.get(&id), Some(-4.0));
        for s in g.s_tilde() {
            assert_eq!(lap.get(s), Some(1.0));
        }
        let gam = delta.gamma(&ab).unwrap();
        assert_eq!(gam.get(&id), Some(4.0));
    }

    #[test]
    fn constants_and_linear_functions_are_harmonic() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let ab = GraphView::abelian(&g);
        let c = BallFunction::<f64>::from_fn(&ab, &g.identity(), 4, |_| 2.5);
        assert!(c.laplacian(&ab).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(c.gamma(&ab).unwrap().values().iter().all(|&v| v == 0.0));
        let lin = BallFunction::<f64>::from_fn(&ab, &g.identity(), 4, |x| x.vec[0] as f64);
        assert!(lin.laplacian(&ab).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shrinkage_and_exhaustion() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let full = GraphView::full(&g);
        let ab = GraphView::abelian(&g);
        let f = BallFunction::<f64>::from_fn(&full, &g.identity(), 3, |x| x.vec[1] as f64);
        assert_eq!(f.laplacian(&full).unwrap().radius(), 2);
        // One S̃ step is two S steps on the honeycomb.
        assert_eq!(f.laplacian(&ab).unwrap().radius(), 1);
        let gone = f.laplacian(&ab).unwrap().laplacian(&ab).unwrap();
        assert!(gone.is_exhausted() && gone.is_empty());
        let out = f.lookup(&e(&[40, 40], 0));
        assert!(out.truncated && out.value == 0.0);
    }

    #[test]
    fn full_operator_cannot_act_on_abelian_ball() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let ab = GraphView::abelian(&g);
        let f = BallFunction::<f64>::from_fn(&ab, &g.identity(), 3, |_| 1.0);
        assert!(matches!(f.laplacian(&GraphView::full(&g)), Err(GraphError::Unreachable { .. })));
    }

    #[test]
    fn hex_words() {
        let g = Group::new(specs::hexagonal()).unwrap();
        let w = word_decompositions(&g, 16).unwrap();
        let letters: Vec<_> = w.words.iter().map(|w| w.letters.clone()).collect();
        // e₁ = (e₁,σ)(0,σ), −e₁ = (0,σ)(e₁,σ), e₂ = (e₂,σ)(0,σ), −e₂ = (0,σ)(e₂,σ)
        assert_eq!(letters, vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![0, 2]]);
        assert_eq!((w.r, w.m, w.k, w.max_letter), (2, 4, 8, 0));
    }

    #[test]
    fn words_when_s_tilde_inside_s() {
        let g = Group::new(specs::lattice(2)).unwrap();
        let w = word_decompositions(&g, 4).unwrap();
        assert_eq!((w.r, w.m, w.k), (1, 1, 1));
    }

    #[test]
    fn klein_words() {
        let g = Group::new(specs::klein_bottle()).unwrap();
        let w = word_decompositions(&g, 8).unwrap();
        assert_eq!((w.r, w.m, w.k), (2, 2, 4));
    }

    #[test]
    fn unreachable_word_is_an_error() {
        let g = Group::new(specs::hexagonal()).unwrap();
        assert!(word_decompositions(&g, 1).is_err());
    }
}
