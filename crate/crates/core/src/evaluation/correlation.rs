//! Pearson and Spearman correlation between matrix columns.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Centered copy of a column with its sum of squares; `None` when it has no
/// variance.
fn centered(col: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    let norm = libm::sqrt(ss);
    (norm > 0.0 && norm.is_finite() && norm > 1e-12 * libm::sqrt(n) * mean.abs().max(1e-300)).then_some((c, ss))
}

// dot / sqrt(ss_a ss_b) rather than a dot of unit vectors: a column against
// itself then gives exactly 1
fn corr_centered(a: &Option<(Vec<f64>, f64)>, b: &Option<(Vec<f64>, f64)>) -> f64 {
    match (a, b) {
        (Some((x, sx)), Some((y, sy))) => {
            let dot = x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            (dot / libm::sqrt(sx * sy)).clamp(-1.0, 1.0)
        }
        _ => 0.0,
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    corr_centered(&centered(x), &centered(y))
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// `C[i][j] = corr(a_i, b_j)` over the rows.
pub fn correlation_matrix(a: &Matrix, b: &Matrix, rank: bool) -> Matrix {
    assert_eq!(a.rows(), b.rows(), "same number of samples");
    let prep = |m: &Matrix| -> Vec<Option<(Vec<f64>, f64)>> {
        (0..m.cols())
            .map(|c| {
                let col = m.column(c);
                centered(&if rank { ranks(&col) } else { col })
            })
            .collect()
    };
    let (za, zb) = (prep(a), prep(b));
    let mut out = Matrix::zeros(a.cols(), b.cols());
    for (i, x) in za.iter().enumerate() {
        for (j, y) in zb.iter().enumerate() {
            out.set(i, j, corr_centered(x, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_column_has_zero_correlation() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(spearman(&[2.0; 4], &[4.0, 1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn perfect_and_anti_correlation() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 1.0).collect();
        assert!((pearson(&x, &y) + 1.0).abs() < 1e-12);
        let z: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert!((spearman(&x, &z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn column_against_itself_is_exactly_one() {
        let x: Vec<f64> = (0..1000).map(|i| libm::sin(i as f64 * 0.37) * 3.1 + 0.2).collect();
        assert_eq!(pearson(&x, &x), 1.0);
        let m = Matrix::from_vec(1000, 1, x).unwrap();
        assert_eq!(correlation_matrix(&m, &m, false).get(0, 0), 1.0);
        assert_eq!(correlation_matrix(&m, &m, true).get(0, 0), 1.0);
    }
}
