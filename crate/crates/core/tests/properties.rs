//! Algebraic laws on random elements.

use cayley_heat::{specs, Element, Generators, Group, QuotientGraph};
use proptest::prelude::*;

fn groups() -> [Group; 2] {
    [Group::new(specs::hexagonal()).unwrap(), Group::new(specs::klein_bottle()).unwrap()]
}

fn element() -> impl Strategy<Value = Element> {
    (prop::collection::vec(-20i64..20, 2), 0usize..2).prop_map(|(v, f)| Element::new(v, f))
}

proptest! {
    #[test]
    fn group_laws(a in element(), b in element(), c in element(), which in 0usize..2) {
        let g = &groups()[which];
        let e = g.identity();
        prop_assert_eq!(g.multiply(&g.multiply(&a, &b), &c), g.multiply(&a, &g.multiply(&b, &c)));
        prop_assert_eq!(g.multiply(&a, &g.invert(&a)), e.clone());
        prop_assert_eq!(g.multiply(&g.invert(&a), &a), e.clone());
        prop_assert_eq!(g.multiply(&a, &e), a.clone());
        prop_assert_eq!(g.multiply(&e, &a), a);
    }

    #[test]
    fn projection_respects_right_multiplication(a in element(), which in 0usize..2, n in 2usize..7) {
        let g = &groups()[which];
        let q = QuotientGraph::new(g, n).unwrap();
        let i = q.project(&a);
        let nb = q.neighbors(Generators::Full, i);
        for s in g.s() {
            prop_assert!(nb.contains(&q.project(&g.multiply(&a, s))));
        }
        prop_assert_eq!(q.project(&q.element(i)), i);
    }

    #[test]
    fn lattice_is_normal(a in element(), v in prop::collection::vec(-20i64..20, 2), which in 0usize..2) {
        let g = &groups()[which];
        let conj = g.conjugate(&Element::translation(v), &a).unwrap();
        prop_assert!(conj.is_translation());
    }
}
