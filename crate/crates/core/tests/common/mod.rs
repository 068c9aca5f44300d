//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use cayley_heat::{Element, Group};

/// Modified Bessel function `I_k(x)` by its power series.
pub fn bessel_i(k: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = (1..=k).fold(1.0, |acc, i| acc * half / i as f64);
    let mut sum = term;
    for m in 0..500u32 {
        term *= half * half / ((m + 1) as f64 * (m + 1 + k) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Heat kernel of `Z^d` with generators `±e_i`: `Π e^{−2t} I_{|v_i|}(2t)`.
pub fn lattice_kernel(v: &[i64], t: f64) -> f64 {
    v.iter().map(|&vi| (-2.0 * t).exp() * bessel_i(vi.unsigned_abs() as u32, 2.0 * t)).product()
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Classical fourth-order Runge-Kutta for `u' = A u`.
pub fn rk4_linear(a: &[Vec<f64>], u0: &[f64], t: f64, h: f64) -> Vec<f64> {
    let mul = |u: &[f64]| -> Vec<f64> { a.iter().map(|row| row.iter().zip(u).map(|(x, y)| x * y).sum()).collect() };
    let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> { u.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let steps = (t / h).round() as usize;
    let mut u = u0.to_vec();
    for _ in 0..steps {
        let k1 = mul(&u);
        let k2 = mul(&axpy(&u, &k1, h / 2.0));
        let k3 = mul(&axpy(&u, &k2, h / 2.0));
        let k4 = mul(&axpy(&u, &k3, h));
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

/// Dense Laplacian on a finite vertex set given a neighbor function that
/// returns vertex indices.
pub fn dense_laplacian(len: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; len]; len];
    for (i, row) in a.iter_mut().enumerate() {
        let nb = neighbors(i);
        row[i] -= nb.len() as f64;
        for j in nb {
            row[j] += 1.0;
        }
    }
    a
}

/// Deterministic pseudo-random function on the group, zero outside a ball
/// given by its points.
pub struct RandomField {
    pub values: HashMap<Element, f64>,
}

impl RandomField {
    pub fn new(points: &[Element], rng: &mut impl rand::Rng) -> Self {
        RandomField { values: points.iter().map(|x| (x.clone(), rng.gen_range(-1.0..1.0))).collect() }
    }

    pub fn at(&self, x: &Element) -> f64 {
        self.values.get(x).copied().unwrap_or(0.0)
    }

    /// `Σ_s (f(xs) − f(x))` straight from the definition.
    pub fn laplacian_at(&self, group: &Group, gens: &[Element], x: &Element) -> f64 {
        gens.iter().map(|s| self.at(&group.multiply(x, s)) - self.at(x)).sum()
    }

    /// `Σ_s (f(xs) − f(x))²`.
    pub fn gamma_at(&self, group: &Group, gens: &[Element], x: &Element) -> f64 {
        gens.iter().map(|s| (self.at(&group.multiply(x, s)) - self.at(x)).powi(2)).sum()
    }
}
