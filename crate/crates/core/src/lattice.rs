//! Integer matrix helpers: Smith normal form invariant factors.

/// Row-major integer matrix.
pub type IntMatrix = Vec<Vec<i64>>;

/// Non-zero invariant factors of `m` (Smith normal form diagonal), in
/// divisibility order. The lattice spanned by the columns of a `d × m`
/// matrix is all of `Z^d` iff this returns `d` ones.
pub fn invariant_factors(m: &IntMatrix) -> Vec<i64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // Pivot: smallest non-zero absolute value in the remaining block.
        let Some((pi, pj)) = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i][j] != 0)
            .min_by_key(|&(i, j)| a[i][j].abs())
        else {
            break;
        };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let p = a[t][t];
            let mut dirty = false;
            for i in t + 1..rows {
                let q = a[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        a[i][j] -= q * a[t][j];
                    }
                }
                dirty |= a[i][t] != 0;
            }
            for j in t + 1..cols {
                let q = a[t][j] / p;
                if q != 0 {
                    for row in a.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                dirty |= a[t][j] != 0;
            }
            if !dirty {
                break;
            }
            // A remainder survived; move the smallest one into the pivot slot.
            let (bi, bj) = (t..rows)
                .map(|i| (i, t))
                .chain((t..cols).map(|j| (t, j)))
                .filter(|&(i, j)| a[i][j] != 0)
                .min_by_key(|&(i, j)| a[i][j].abs())
                .expect("non-zero remainder");
            a.swap(t, bi);
            for row in a.iter_mut() {
                row.swap(t, bj);
            }
        }
        diag.push(a[t][t].abs());
        t += 1;
    }
    // diag(a, b) ~ diag(gcd, lcm) restores the divisibility chain.
    for i in 0..diag.len() {
        for j in i + 1..diag.len() {
            let g = gcd(diag[i], diag[j]);
            let l = diag[i] / g * diag[j];
            diag[i] = g;
            diag[j] = l;
        }
    }
    diag.into_iter().map(|x| x as i64).collect()
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_columns() {
        assert_eq!(invariant_factors(&vec![vec![1, 0, -1, 0], vec![0, 1, 0, -1]]), vec![1, 1]);
    }

    #[test]
    fn classic_example() {
        // diag(2, 6, 12) up to unimodular change of basis.
        let m = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        assert_eq!(invariant_factors(&m), vec![2, 6, 12]);
    }

    #[test]
    fn rank_deficient() {
        assert_eq!(invariant_factors(&vec![vec![1, -1], vec![0, 0]]), vec![1]);
        assert_eq!(invariant_factors(&vec![vec![0, 0], vec![0, 0]]), Vec::<i64>::new());
    }

    #[test]
    fn coprime_entries_generate() {
        assert_eq!(invariant_factors(&vec![vec![2, 3]]), vec![1]);
        assert_eq!(invariant_factors(&vec![vec![4, 6]]), vec![2]);
    }
}
