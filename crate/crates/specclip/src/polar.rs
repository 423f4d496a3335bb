//! Canonical partial polar factor `Pol(M) = U V^T`.
//!
//! The Newton-Schulz path is the production kernel; `polar_exact` goes
//! through the SVD oracle and serves as ground truth and fallback. On
//! rank-deficient inputs the iteration converges to a partial isometry
//! (zero on the null space, not an orthogonal completion), so residuals are
//! measured on the detected row space.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::svd::{svd_compact, DEFAULT_TRUNC_TOL};

pub const DEFAULT_MAX_ITER: usize = 40;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Available polar kernels. Scaled-Newton/QDWH alternatives would slot in
/// here if the desk sizes ever stop being enough.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarMethod {
    NewtonSchulz,
    Exact,
}

/// A partial isometry with the same shape as the input.
#[derive(Debug, Clone)]
pub struct PolarResult {
    pub q: DenseMatrix,
    pub iterations: usize,
    /// `||q^T q - P||` restricted to the detected row space (P the exact
    /// projector); equals `||q^T q - I||_F` on full-rank inputs.
    pub ortho_residual: f64,
    pub converged: bool,
    /// `||X_k^T X_k - I||_F` per iteration, for convergence diagnostics.
    pub residual_history: Vec<f64>,
}

fn gram_residuals(q: &DenseMatrix) -> (f64, f64) {
    let g = q.matmul_at_b(q).expect("gram is well defined");
    let n = g.rows();
    let full = g.sub(&DenseMatrix::identity(n)).expect("same shape").frobenius_norm();
    let proj = g
        .matmul(&g)
        .expect("square")
        .sub(&g)
        .expect("same shape")
        .frobenius_norm();
    (full, proj)
}

fn report_residual(full: f64, proj: f64, tol: f64) -> f64 {
    // A converged partial isometry on a rank-deficient input keeps
    // ||G - I|| at sqrt(#null directions); the projector residual is the
    // meaningful one there.
    if full > 10.0 * proj.max(tol) {
        proj
    } else {
        full
    }
}

/// Upper bound on sigma_1 used for the initial scaling, refined by a short
/// power iteration. The clamp keeps the certified bound
/// `sigma(X_0) <= bound/s <= 1.4 < sqrt(2)`, inside the Newton-Schulz
/// convergence region, even if the power estimate is poor.
fn initial_scale(m: &DenseMatrix) -> f64 {
    let bound = (m.norm_one() * m.norm_inf()).sqrt().min(m.frobenius_norm());
    let mut v = vec![0.0; m.cols()];
    let inv = 1.0 / (m.cols() as f64).sqrt();
    for x in v.iter_mut() {
        *x = inv;
    }
    let mut estimate = 0.0;
    for _ in 0..12 {
        let w = m.apply(&v).expect("shape fixed");
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let mut back = m.apply_transpose(&w).expect("shape fixed");
        let back_norm: f64 = back.iter().map(|x| x * x).sum::<f64>().sqrt();
        if back_norm == 0.0 {
            estimate = norm;
            break;
        }
        for x in back.iter_mut() {
            *x /= back_norm;
        }
        v = back;
        estimate = norm;
    }
    bound.min((1.25 * estimate).max(bound / 1.4))
}

/// Newton-Schulz polar iteration `X <- X (3I - X^T X) / 2`.
///
/// The input is scaled so the start satisfies the sufficient condition
/// `||I - X_0^T X_0||_2 < 1` on the numerical row space; wide matrices are
/// handled by iterating on the transpose. Non-convergence is reported via
/// `converged = false`, never as an error.
pub fn polar_newton_schulz(m: &DenseMatrix, max_iter: usize, tol: f64) -> Result<PolarResult> {
    if m.frobenius_norm() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if m.rows() < m.cols() {
        let t = polar_newton_schulz(&m.transpose(), max_iter, tol)?;
        return Ok(PolarResult { q: t.q.transpose(), ..t });
    }

    let scale = initial_scale(m);
    let mut x = m.scale(1.0 / scale);
    let n = m.cols();
    let identity = DenseMatrix::identity(n);

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_full = f64::INFINITY;
    let mut last_proj = f64::INFINITY;
    for _ in 0..max_iter {
        let g = x.matmul_at_b(&x)?;
        let full = g.sub(&identity)?.frobenius_norm();
        let proj = g.matmul(&g)?.sub(&g)?.frobenius_norm();
        history.push(full);
        last_full = full;
        last_proj = proj;
        if proj <= tol {
            converged = true;
            break;
        }
        // X (3I - G) / 2
        let update = x.matmul(&g)?;
        x = x.scale(1.5).sub(&update.scale(0.5))?;
        iterations += 1;
    }
    if !converged {
        // The loop ends on an un-evaluated update; measure the final state.
        let (full, proj) = gram_residuals(&x);
        history.push(full);
        last_full = full;
        last_proj = proj;
        converged = proj <= tol;
    }
    Ok(PolarResult {
        q: x,
        iterations,
        ortho_residual: report_residual(last_full, last_proj, tol),
        converged,
        residual_history: history,
    })
}

/// Exact partial polar factor `U V^T` from the SVD oracle.
pub fn polar_exact(m: &DenseMatrix) -> Result<PolarResult> {
    if m.frobenius_norm() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let f = svd_compact(m, DEFAULT_TRUNC_TOL)?;
    let q = f.u.matmul(&f.v.transpose())?;
    let (full, proj) = gram_residuals(&q);
    Ok(PolarResult {
        q,
        iterations: 0,
        ortho_residual: report_residual(full, proj, 1e-14),
        converged: true,
        residual_history: Vec::new(),
    })
}

/// Dispatch on the configured kernel.
pub fn polar(m: &DenseMatrix, method: PolarMethod, max_iter: usize, tol: f64) -> Result<PolarResult> {
    match method {
        PolarMethod::NewtonSchulz => polar_newton_schulz(m, max_iter, tol),
        PolarMethod::Exact => polar_exact(m),
    }
}
