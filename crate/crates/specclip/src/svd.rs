//! Compact SVD via one-sided Jacobi.
//!
//! This is the ground-truth oracle for every clipping method in the crate, so
//! it favors accuracy over speed: rotations are applied until all column
//! pairs are orthogonal to near machine precision. The iteration runs on the
//! taller orientation (the transpose is factored for wide inputs) and zero
//! singular values are removed by a relative truncation threshold, so the
//! factors are always strictly positive and non-increasing.

use crate::error::{Error, Result};
use crate::matrix::{ops, DenseMatrix};

/// Default relative truncation threshold for compact factorizations.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;
const PAIR_TOL: f64 = 1e-15;

/// Compact singular value decomposition `M = U diag(sigma) V^T`.
///
/// `u` is `m x r`, `v` is `n x r`, both with orthonormal columns; `sigma` is
/// strictly positive and non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Largest singular value.
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Rebuild `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.u.clone();
        for i in 0..scaled.rows() {
            for (j, &s) in self.sigma.iter().enumerate() {
                let v = scaled.get(i, j) * s;
                scaled.set(i, j, v);
            }
        }
        let vt = self.v.transpose();
        scaled.matmul(&vt).expect("factor shapes are consistent")
    }
}

/// Compact SVD with rank truncation at `trunc_tol * sigma_1`.
///
/// Errors on exactly zero input (a compact factorization of 0 has no
/// columns) and when the sweep cap is exceeded.
pub fn svd_compact(m: &DenseMatrix, trunc_tol: f64) -> Result<SvdFactorization> {
    if m.rows() < m.cols() {
        let t = svd_compact(&m.transpose(), trunc_tol)?;
        return Ok(SvdFactorization { u: t.v, sigma: t.sigma, v: t.u });
    }

    let (rows, n) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut w = DenseMatrix::identity(n);

    let mut worst = 0.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        worst = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                let cosine = apq.abs() / (app * aqq).sqrt();
                worst = worst.max(cosine);
                if cosine <= PAIR_TOL {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    a.set(i, p, c * x - s * y);
                    a.set(i, q, s * x + c * y);
                }
                for i in 0..n {
                    let x = w.get(i, p);
                    let y = w.get(i, q);
                    w.set(i, p, c * x - s * y);
                    w.set(i, q, s * x + c * y);
                }
                ops::add_flops(6 * (rows + n) as u64);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && worst > 1e-12 {
        return Err(Error::NoConvergence {
            algorithm: "one-sided Jacobi SVD",
            iterations: sweeps,
            residual: worst,
        });
    }

    let mut norms: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    if sigma_max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let cutoff = trunc_tol.max(0.0) * sigma_max;
    let kept: Vec<usize> = order.into_iter().filter(|&j| norms[j] > cutoff).collect();
    let r = kept.len();

    let mut u = DenseMatrix::zeros(rows, r);
    let mut v = DenseMatrix::zeros(n, r);
    let mut sigma = Vec::with_capacity(r);
    for (col, &j) in kept.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        for i in 0..rows {
            u.set(i, col, a.get(i, j) / s);
        }
        for i in 0..n {
            v.set(i, col, w.get(i, j));
        }
        norms[j] = s;
    }
    Ok(SvdFactorization { u, sigma, v })
}
