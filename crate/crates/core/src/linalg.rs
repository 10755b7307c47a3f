//! Thin wrappers over nalgebra for the few decompositions the crate needs.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::matrix::Matrix;

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.set(r, c, m[(r, c)]);
        }
    }
    out
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    to_dmatrix(m).singular_values().iter().copied().collect()
}

/// Singular values below `RANK_TOLERANCE × σ_max` are treated as zero.
pub fn numeric_rank(m: &Matrix) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Ratio of the largest to the smallest singular value (infinite when singular).
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Orthogonal factor of a QR decomposition, with column signs fixed so the
/// triangular factor has a non-negative diagonal.
pub fn orthogonal_factor(m: &Matrix) -> Matrix {
    let qr = to_dmatrix(m).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..q.ncols().min(r.nrows()) {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    from_dmatrix(&q)
}

pub fn determinant(m: &Matrix) -> f64 {
    to_dmatrix(m).determinant()
}
