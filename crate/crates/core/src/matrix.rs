//! Row-major dense matrices and the group layout shared by graphs, samples and datasets.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

/// Dense row-major matrix of `f64`. Rows are samples wherever a matrix holds data.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Wraps a row-major buffer. Returns `None` when the length is not `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Some(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Copies the given columns, in order, into a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            let src = self.row(r);
            let dst = out.row_mut(r);
            for (d, &c) in dst.iter_mut().zip(cols) {
                *d = src[c];
            }
        }
        out
    }

    /// Copies a contiguous column range.
    pub fn column_block(&self, range: Range<usize>) -> Self {
        let width = range.len();
        let mut out = Self::zeros(self.rows, width);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[range.clone()]);
        }
        out
    }

    /// Writes `block` into the column range starting at `start`.
    pub fn set_column_block(&mut self, start: usize, block: &Matrix) {
        debug_assert_eq!(block.rows, self.rows);
        for r in 0..self.rows {
            self.row_mut(r)[start..start + block.cols].copy_from_slice(block.row(r));
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Partition of `D` variables into contiguous groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Self { dims, offsets }
    }

    pub fn uniform(groups: usize, dim: usize) -> Self {
        Self::new(vec![dim; groups])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_groups(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.offsets[self.dims.len()]
    }

    pub fn offset(&self, group: usize) -> usize {
        self.offsets[group]
    }

    pub fn range(&self, group: usize) -> Range<usize> {
        self.offsets[group]..self.offsets[group + 1]
    }

    /// Group index of a variable. Panics when `var >= total()`.
    pub fn group_of(&self, var: usize) -> usize {
        assert!(var < self.total(), "variable {var} out of range");
        self.offsets[1..].partition_point(|&end| end <= var)
    }

    pub fn group_map(&self) -> Vec<usize> {
        (0..self.dims.len()).flat_map(|m| core::iter::repeat_n(m, self.dims[m])).collect()
    }
}
