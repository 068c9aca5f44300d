//! Bundled example groups.

use crate::group::{Element, GroupSpec};

const HEXAGONAL: &str = include_str!("../specs/hexagonal.json");
const KLEIN_BOTTLE: &str = include_str!("../specs/klein_bottle.json");

/// Honeycomb lattice: `Z² ⋊ Z₂` with `σ` acting as `−I`, `S = {(0,σ), (e₁,σ), (e₂,σ)}`.
pub fn hexagonal() -> GroupSpec {
    GroupSpec::from_json(HEXAGONAL).expect("bundled spec parses")
}

/// Non-split extension of `Z₂` by `Z²` (glide reflection squaring to `e₁`).
pub fn klein_bottle() -> GroupSpec {
    GroupSpec::from_json(KLEIN_BOTTLE).expect("bundled spec parses")
}

/// `Z^d` with trivial `F` and `S = S̃ = {±e_i}`.
pub fn lattice(d: usize) -> GroupSpec {
    let mut gens = Vec::with_capacity(2 * d);
    for i in 0..d {
        for sign in [1, -1] {
            let mut v = vec![0; d];
            v[i] = sign;
            gens.push(Element::translation(v));
        }
    }
    let ident = (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect();
    GroupSpec {
        name: format!("Z^{d}"),
        d,
        f_table: vec![vec![0]],
        action: vec![ident],
        cocycle: vec![vec![vec![0; d]]],
        s: gens.clone(),
        s_tilde: gens,
    }
}

/// Look up a bundled spec by name.
pub fn by_name(name: &str) -> Option<GroupSpec> {
    match name {
        "hex" | "hexagonal" => Some(hexagonal()),
        "klein" | "klein-bottle" => Some(klein_bottle()),
        _ => name
            .strip_prefix('Z')
            .and_then(|d| d.trim_start_matches('^').parse().ok())
            .filter(|&d| d > 0)
            .map(lattice),
    }
}
