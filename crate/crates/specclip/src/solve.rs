//! Small dense factorizations: Householder orthonormalization, LU with
//! partial pivoting, and a diagonally pivoted LDL^T for symmetric solves.
//!
//! These back the iterative kernels (range finding, sign iterations, rational
//! filter solves). They are deliberately unblocked; problem sizes here are
//! desk scale.

use crate::error::{Error, Result};
use crate::matrix::{ops, DenseMatrix};

/// Orthonormal basis for the columns of `a` via Householder QR.
///
/// Returns the thin factor with `a.cols()` orthonormal columns; requires
/// `a.cols() <= a.rows()`. Zero (or dependent) columns still yield an
/// orthonormal basis because skipped reflectors act as the identity.
pub fn orthonormal_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n) = (a.rows(), a.cols());
    if n > m {
        return Err(Error::ShapeMismatch(format!(
            "orthonormal_columns: need cols <= rows, got {m}x{n}"
        )));
    }
    ops::add_flops((2 * m * n * n) as u64);

    let mut r = a.clone();
    // Householder vectors, one per column; v[k] has length m - k.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            vs.push(Vec::new());
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        // Apply I - 2 v v^T to the trailing block of R.
        for j in k..n {
            let dot: f64 = v.iter().enumerate().map(|(i, &vi)| vi * r.get(k + i, j)).sum();
            for (i, &vi) in v.iter().enumerate() {
                let val = r.get(k + i, j) - 2.0 * vi * dot;
                r.set(k + i, j, val);
            }
        }
        vs.push(v);
    }

    // Accumulate the thin Q by applying reflectors in reverse to [I_n; 0].
    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q.set(j, j, 1.0);
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(i, &vi)| vi * q.get(k + i, j)).sum();
            for (i, &vi) in v.iter().enumerate() {
                let val = q.get(k + i, j) - 2.0 * vi * dot;
                q.set(k + i, j, val);
            }
        }
    }
    Ok(q)
}

/// LU factorization with partial pivoting.
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    /// Smallest and largest |U_ii|, a cheap conditioning proxy.
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch("lu: matrix must be square".into()));
        }
        let n = a.rows();
        ops::add_flops((2 * n * n * n / 3) as u64);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, tmp);
                }
                perm.swap(k, p);
            }
            let pivot = lu.get(k, k);
            min_pivot = min_pivot.min(pivot.abs());
            max_pivot = max_pivot.max(pivot.abs());
            if pivot == 0.0 {
                continue; // singular; recorded via min_pivot = 0
            }
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Self { lu, perm, min_pivot, max_pivot })
    }

    pub fn is_singular(&self) -> bool {
        self.min_pivot == 0.0
    }

    /// Conditioning proxy `max|U_ii| / min|U_ii|`.
    pub fn condition_estimate(&self) -> f64 {
        if self.min_pivot == 0.0 {
            f64::INFINITY
        } else {
            self.max_pivot / self.min_pivot
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::ShapeMismatch("lu solve: rhs length".into()));
        }
        if self.is_singular() {
            return Err(Error::SingularSolve { min_pivot: self.min_pivot });
        }
        ops::add_flops((2 * n * n) as u64);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s / self.lu.get(i, i);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.lu.rows();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve_vec(&e)?;
            e[j] = 0.0;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }
}

/// Diagonally pivoted LDL^T factorization of a symmetric matrix.
///
/// Pivot selection takes the largest remaining |diagonal| entry, which is
/// exact for definite matrices and adequate for the nearly definite
/// coefficients produced by the rational filter. The pivots double as the
/// conditioning signal reported in diagnostics.
#[derive(Debug)]
pub struct Ldlt {
    factor: DenseMatrix,
    perm: Vec<usize>,
    pub pivots: Vec<f64>,
}

impl Ldlt {
    /// `pivot_floor` is the absolute value below which a pivot is declared
    /// numerically singular.
    pub fn factor(a: &DenseMatrix, pivot_floor: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch("ldlt: matrix must be square".into()));
        }
        let n = a.rows();
        ops::add_flops((n * n * n / 3) as u64);
        let mut w = a.symmetrized();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = k;
            let mut best = w.get(k, k).abs();
            for i in (k + 1)..n {
                let v = w.get(i, i).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = w.get(k, j);
                    w.set(k, j, w.get(p, j));
                    w.set(p, j, tmp);
                }
                for i in 0..n {
                    let tmp = w.get(i, k);
                    w.set(i, k, w.get(i, p));
                    w.set(i, p, tmp);
                }
                perm.swap(k, p);
            }
            let d = w.get(k, k);
            if d.abs() <= pivot_floor {
                return Err(Error::SingularSolve { min_pivot: d.abs() });
            }
            pivots.push(d);
            for i in (k + 1)..n {
                let l = w.get(i, k) / d;
                w.set(i, k, l);
                if l == 0.0 {
                    continue;
                }
                for j in (k + 1)..=i {
                    let v = w.get(i, j) - l * d * w.get(j, k);
                    w.set(i, j, v);
                    w.set(j, i, v);
                }
            }
        }
        Ok(Self { factor: w, perm, pivots })
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.pivots.iter().fold(f64::INFINITY, |acc, p| acc.min(p.abs()))
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.factor.rows();
        if b.len() != n {
            return Err(Error::ShapeMismatch("ldlt solve: rhs length".into()));
        }
        ops::add_flops((2 * n * n) as u64);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.factor.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.pivots[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.factor.get(j, i) * x[j];
            }
            x[i] = s;
        }
        let mut out = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.factor.rows();
        if b.rows() != n {
            return Err(Error::ShapeMismatch("ldlt solve: rhs rows".into()));
        }
        let mut out = DenseMatrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.col(j))?;
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        Ok(out)
    }
}
