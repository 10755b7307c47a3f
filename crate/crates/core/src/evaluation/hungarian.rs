//! Minimum-cost perfect matching on a square cost matrix (Hungarian method
//! with row/column potentials, O(n³)).

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

/// Returns `assignment[row] = column` minimizing the total cost.
pub fn hungarian(cost: &Matrix) -> Vec<usize> {
    let n = cost.rows();
    assert_eq!(n, cost.cols(), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut match_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        match_of_col[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = match_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let cur = cost.get(r - 1, c - 1) - u[r] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[match_of_col[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if match_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            match_of_col[col0] = match_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for c in 1..=n {
        out[match_of_col[c] - 1] = c - 1;
    }
    out
}
