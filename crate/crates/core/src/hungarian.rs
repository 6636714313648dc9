//! Maximum-weight bipartite assignment (Kuhn-Munkres with potentials).
//!
//! Scores are negated into costs and solved with the `O(n²m)` shortest
//! augmenting path formulation. Rectangular inputs are handled by running
//! over the shorter side, which is equivalent to padding with constant cost.

/// Returns `min(n, m)` pairs `(row, col)` maximizing the total score,
/// sorted by row. The result is deterministic for a given matrix.
///
/// # Panics
///
/// Panics if the rows have different lengths.
pub fn hungarian_max(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    let m = scores[0].len();
    assert!(scores.iter().all(|r| r.len() == m), "ragged score matrix");
    if m == 0 {
        return Vec::new();
    }

    let mut pairs: Vec<(usize, usize)> = if n <= m {
        solve_min(n, m, |i, j| -scores[i][j])
            .into_iter()
            .enumerate()
            .collect()
    } else {
        solve_min(m, n, |i, j| -scores[j][i])
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect()
    };
    pairs.sort_unstable();
    pairs
}

/// Total score of an assignment, summed in row order.
pub fn assignment_score(scores: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| scores[i][j]).sum()
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns. Returns the
/// column of every row.
fn solve_min(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based with index 0 as the virtual root, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of[owner[j] - 1] = j - 1;
        }
    }
    col_of
}
