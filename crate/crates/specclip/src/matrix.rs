//! Row-major dense real matrices.
//!
//! `DenseMatrix` is the carrier type for every operator in this crate: update
//! matrices, symmetric factors, orthonormal bases, and optimizer buffers. It
//! is deliberately plain — owned `Vec<f64>` storage, no views, no SIMD — so
//! the numerical kernels stay easy to audit.

use crate::error::{Error, Result};

/// Cost instrumentation for the bench harness.
///
/// Thread-local accumulators: `flops` is a floating-op proxy fed by the dense
/// kernels (matmul, Jacobi sweeps, factorizations), `matmul_calls` counts
/// explicit matrix products. Diagnostics only; nothing in the library reads
/// these back.
pub mod ops {
    use std::cell::Cell;

    thread_local! {
        static FLOPS: Cell<u64> = const { Cell::new(0) };
        static MATMUL_CALLS: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        FLOPS.with(|c| c.set(0));
        MATMUL_CALLS.with(|c| c.set(0));
    }

    pub fn flops() -> u64 {
        FLOPS.with(|c| c.get())
    }

    pub fn matmul_calls() -> u64 {
        MATMUL_CALLS.with(|c| c.get())
    }

    pub(crate) fn add_flops(n: u64) {
        FLOPS.with(|c| c.set(c.get().saturating_add(n)));
    }

    pub(crate) fn count_matmul() {
        MATMUL_CALLS.with(|c| c.set(c.get() + 1));
    }
}

/// Dense real matrix, row-major, always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build a matrix from row-major data, rejecting empty shapes, length
    /// mismatches, and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::DataLength { rows, cols, got: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = diag[i];
        }
        m
    }

    /// Rectangular matrix with `diag` on the leading diagonal.
    pub fn diag_rect(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        ops::count_matmul();
        ops::add_flops(2 * (self.rows * self.cols * other.cols) as u64);
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other` without forming the transpose.
    pub fn matmul_at_b(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul_at_b: ({}x{})^T * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        ops::count_matmul();
        ops::add_flops(2 * (self.cols * self.rows * other.cols) as u64);
        let (m, k, n) = (self.cols, self.rows, other.cols);
        let mut out = DenseMatrix::zeros(m, n);
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &other.data[p * n..(p + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "apply: {}x{} * vec[{}]",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        ops::add_flops(2 * (self.rows * self.cols) as u64);
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Transposed matrix-vector product `self^T * v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "apply_transpose: ({}x{})^T * vec[{}]",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        ops::add_flops(2 * (self.rows * self.cols) as u64);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b, "add")
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b, "sub")
    }

    fn zip_with(
        &self,
        other: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
        name: &str,
    ) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{name}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    /// Add `s` to the diagonal (square matrices).
    pub fn add_diag(&self, s: f64) -> DenseMatrix {
        debug_assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += s;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &x) in sums.iter_mut().zip(self.row(i)) {
                *s += x.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// `(A + A^T) / 2` for square matrices.
    pub fn symmetrized(&self) -> DenseMatrix {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    /// `max |A_ij - A_ji|`, a cheap symmetry check.
    pub fn symmetry_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                err = err.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        err
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        let c = self.cols;
        &mut self.data[i * c + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(DenseMatrix::new(0, 3, vec![]), Err(Error::EmptyMatrix)));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::DataLength { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn matmul_identity_returns_input() {
        let a = DenseMatrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let i3 = DenseMatrix::identity(3);
        assert_eq!(i3.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_annihilates_zero() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = DenseMatrix::zeros(2, 3);
        let prod = a.matmul(&z).unwrap();
        assert!(prod.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_hand_example() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 2);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn at_b_matches_explicit_transpose() {
        let a = DenseMatrix::new(3, 2, vec![1.0, -2.0, 0.5, 4.0, -1.0, 2.0]).unwrap();
        let b = DenseMatrix::new(3, 3, vec![1.0, 0.0, 2.0, 3.0, 1.0, -1.0, 0.0, 2.0, 1.0]).unwrap();
        let fast = a.matmul_at_b(&b).unwrap();
        let slow = a.transpose().matmul(&b).unwrap();
        for (x, y) in fast.data().iter().zip(slow.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_on_known_matrix() {
        let a = DenseMatrix::new(2, 2, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.norm_one(), 6.0);
        assert_eq!(a.norm_inf(), 7.0);
        assert!((a.frobenius_norm() - 30.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ops_counter_tracks_matmuls() {
        ops::reset();
        let a = DenseMatrix::identity(4);
        let _ = a.matmul(&a).unwrap();
        assert_eq!(ops::matmul_calls(), 1);
        assert_eq!(ops::flops(), 2 * 4 * 4 * 4);
    }
}
