//! Slow reference implementations used to check the fast paths.
//!
//! Each oracle is written independently of the code it checks: exhaustive
//! enumeration, direct pixel counting, naive loops.

use crate::hungarian::assignment_score;
use crate::mask::MaskVolume;
use crate::query::ResponseMap;

/// Best total score over every injective assignment of the shorter side,
/// each total summed in row order.
pub fn best_assignment_total(scores: &[Vec<f64>]) -> f64 {
    let (n, m) = (scores.len(), scores.first().map_or(0, Vec::len));
    if n == 0 || m == 0 {
        return 0.0;
    }
    let transpose = n > m;
    let short = n.min(m);
    let mut best = f64::NEG_INFINITY;
    let mut choice = Vec::with_capacity(short);
    let mut used = vec![false; n.max(m)];
    enumerate(scores, short, transpose, &mut choice, &mut used, &mut best);
    best
}

fn enumerate(
    scores: &[Vec<f64>],
    short: usize,
    transpose: bool,
    choice: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut f64,
) {
    if choice.len() == short {
        let mut pairs: Vec<(usize, usize)> = choice
            .iter()
            .enumerate()
            .map(|(a, &b)| if transpose { (b, a) } else { (a, b) })
            .collect();
        pairs.sort_unstable();
        *best = best.max(assignment_score(scores, &pairs));
        return;
    }
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            choice.push(c);
            enumerate(scores, short, transpose, choice, used, best);
            choice.pop();
            used[c] = false;
        }
    }
}

/// Mask IoU by counting voxels one at a time through `get`.
pub fn pixel_count_iou(a: &MaskVolume, b: &MaskVolume) -> f64 {
    let (t, h, w) = a.shape();
    let (mut inter, mut union) = (0u64, 0u64);
    for ti in 0..t {
        for y in 0..h {
            for x in 0..w {
                let p = a.get(ti, y, x) > 0.5;
                let q = b.get(ti, y, x) > 0.5;
                if p && q {
                    inter += 1;
                }
                if p || q {
                    union += 1;
                }
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Peak of the pixel block `[y0, y1) × [x0, x1)` of frame `t`, scanning in
/// row-major order and keeping the first maximum.
pub fn block_argmax(r: &ResponseMap, t: usize, y0: usize, y1: usize, x0: usize, x1: usize) -> (usize, usize) {
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            cells.push((y, x));
        }
    }
    let max = cells.iter().map(|&(y, x)| r.get(t, y, x)).fold(f64::NEG_INFINITY, f64::max);
    *cells.iter().find(|&&(y, x)| r.get(t, y, x) == max).expect("non-empty block")
}

/// `Σ_k q[n,k] · D[k,t,y,x]` with nested loops, no slicing tricks.
pub fn naive_contraction(q: &[f64], dim: usize, d: &[f64], plane: usize) -> Vec<Vec<f64>> {
    let n = q.len() / dim;
    let mut out = vec![vec![0.0; plane]; n];
    for (ni, row) in out.iter_mut().enumerate() {
        for (p, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += q[ni * dim + k] * d[k * plane + p];
            }
            *cell = acc;
        }
    }
    out
}
