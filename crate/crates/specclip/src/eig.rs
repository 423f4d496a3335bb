//! Symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Ground truth for the functional-calculus paths: the matrix absolute
//! value fallback, the scalar filter applied through `g_tau`, and every
//! eigenvalue-tracking test. Inputs are symmetrized as `(H + H^T)/2` before
//! factoring.

use crate::error::{Error, Result};
use crate::matrix::{ops, DenseMatrix};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition `H = Q diag(lambda) Q^T` with orthogonal `Q` and
/// eigenvalues sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub q: DenseMatrix,
    pub lambda: Vec<f64>,
}

impl SymEig {
    /// Apply a scalar function through the eigenbasis: `Q f(diag) Q^T`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mapped: Vec<f64> = self.lambda.iter().map(|&l| f(l)).collect();
        let n = self.q.rows();
        let mut scaled = self.q.clone();
        for i in 0..n {
            for (j, &s) in mapped.iter().enumerate() {
                let v = scaled.get(i, j) * s;
                scaled.set(i, j, v);
            }
        }
        scaled
            .matmul(&self.q.transpose())
            .expect("eigenvector factor is square")
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.apply_fn(|l| l)
    }
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a.get(i, j) * a.get(i, j);
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be square and symmetric to about 1e-12 relative; it is
/// symmetrized internally before the sweeps.
pub fn sym_eig(h: &DenseMatrix) -> Result<SymEig> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch("sym_eig: matrix must be square".into()));
    }
    let scale = h.max_abs().max(1.0);
    if h.symmetry_error() > 1e-12 * scale {
        return Err(Error::InvalidParameter(
            "sym_eig: input is not symmetric to 1e-12".into(),
        ));
    }

    let n = h.rows();
    let mut a = h.symmetrized();
    let mut q = DenseMatrix::identity(n);
    let fro = a.frobenius_norm();
    if fro == 0.0 {
        return Ok(SymEig { q, lambda: vec![0.0; n] });
    }
    let tol = 1e-15 * fro;

    let mut converged = false;
    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while sweeps < MAX_SWEEPS {
        if off <= tol {
            converged = true;
            break;
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q_idx in (p + 1)..n {
                let apq = a.get(p, q_idx);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q_idx, q_idx);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                for r in 0..n {
                    if r == p || r == q_idx {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q_idx);
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a.set(r, p, new_rp);
                    a.set(p, r, new_rp);
                    a.set(r, q_idx, new_rq);
                    a.set(q_idx, r, new_rq);
                }
                let new_pp = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                let new_qq = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a.set(p, p, new_pp);
                a.set(q_idx, q_idx, new_qq);
                a.set(p, q_idx, 0.0);
                a.set(q_idx, p, 0.0);

                for r in 0..n {
                    let qrp = q.get(r, p);
                    let qrq = q.get(r, q_idx);
                    q.set(r, p, c * qrp - s * qrq);
                    q.set(r, q_idx, s * qrp + c * qrq);
                }
                ops::add_flops(12 * n as u64);
            }
        }
        off = off_diagonal_norm(&a);
    }
    if !converged && off > tol {
        return Err(Error::NoConvergence {
            algorithm: "cyclic Jacobi eigensolver",
            iterations: sweeps,
            residual: off,
        });
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a.get(i, i), i)).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let lambda: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut q_sorted = DenseMatrix::zeros(n, n);
    for (col, &(_, src)) in pairs.iter().enumerate() {
        for i in 0..n {
            q_sorted.set(i, col, q.get(i, src));
        }
    }
    Ok(SymEig { q: q_sorted, lambda })
}
