//! Clipping via the polar/absolute-value identity.
//!
//! For `M = Q H` with `H = (M^T M)^{1/2}`, the clipped matrix is
//! `Q * (H + tau*I - |H - tau*I|) / 2`; on the left side the roles of
//! `K = (M M^T)^{1/2}` and `Q` swap. The identity is exact, including for
//! singular values at the threshold, so all the numerical content is in how
//! `Q` and the matrix absolute value are approximated. The absolute value
//! runs a scaled inverse Newton sign iteration with an eigensolver fallback
//! for the near-singular shifts where the sign function stops being
//! meaningful.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clip::{ClipMethod, ClipResult};
use crate::eig::sym_eig;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::polar::polar_newton_schulz;
use crate::solve::Lu;

/// Which Gram square root a symmetric factor approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSide {
    /// `H = (M^T M)^{1/2}`, an n x n factor with `M = Q H`.
    Right,
    /// `K = (M M^T)^{1/2}`, an m x m factor with `M = K Q`.
    Left,
}

/// Explicitly symmetrized approximation of `H` or `K`.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    pub h: DenseMatrix,
    pub side: FactorSide,
}

/// Knobs for the absolute-value clipping path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AbsClipConfig {
    /// Newton-Schulz stopping tolerance for the polar factor.
    pub polar_tol: f64,
    /// Relative step tolerance for the sign iteration.
    pub abs_tol: f64,
    /// Iteration cap shared by the polar and sign loops.
    pub max_iter: usize,
    /// Condition estimate beyond which the sign iteration defers to the
    /// eigensolver (the sign function is discontinuous at zero, so iterating
    /// across it produces noise, not an answer).
    pub cond_cap: f64,
    /// Eigenvalues within `band_tol * max|lambda|` of zero are flushed to
    /// zero in the fallback, implementing sign(0) = 0.
    pub band_tol: f64,
}

impl Default for AbsClipConfig {
    fn default() -> Self {
        Self {
            polar_tol: 1e-10,
            abs_tol: 1e-11,
            max_iter: 60,
            cond_cap: 1e12,
            band_tol: 1e-10,
        }
    }
}

/// Build the symmetrized factor from an (approximate) polar factor.
///
/// Right side: `(Q^T M + M^T Q) / 2`; left side: `(M Q^T + Q M^T) / 2`.
pub fn symmetric_factor_from_polar(
    m: &DenseMatrix,
    q: &DenseMatrix,
    side: FactorSide,
) -> Result<SymmetricFactor> {
    if q.rows() != m.rows() || q.cols() != m.cols() {
        return Err(Error::ShapeMismatch(format!(
            "symmetric_factor_from_polar: m {}x{}, q {}x{}",
            m.rows(),
            m.cols(),
            q.rows(),
            q.cols()
        )));
    }
    let h = match side {
        FactorSide::Right => q.matmul_at_b(m)?.symmetrized(),
        FactorSide::Left => m.matmul(&q.transpose())?.symmetrized(),
    };
    Ok(SymmetricFactor { h, side })
}

#[derive(Debug, Clone)]
pub struct MatrixAbsOutcome {
    pub value: DenseMatrix,
    pub iterations: usize,
    /// True when the eigensolver fallback produced the result.
    pub fallback: bool,
    /// Final relative step of the sign iteration (0 on the fallback path).
    pub final_delta: f64,
}

fn abs_via_eig(a: &DenseMatrix, band_tol: f64) -> Result<DenseMatrix> {
    let e = sym_eig(&a.symmetrized())?;
    let scale = e.lambda.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
    let band = band_tol * scale;
    Ok(e.apply_fn(|l| if l.abs() <= band { 0.0 } else { l.abs() }))
}

/// `|A| = A sign(A)` for symmetric `A`, full-diagnostics form.
///
/// Scaled inverse Newton sign iteration
/// `S_{k+1} = (c_k S_k + (c_k S_k)^{-1}) / 2` with determinant-free norm
/// scaling `c_k = sqrt(||S_k^{-1}||_F / ||S_k||_F)`. Shifts whose solves
/// exceed `cond_cap` fall back to exact functional calculus through the
/// eigensolver, applying the spectral convention sign(0) = 0 inside the
/// `band_tol` band.
pub fn matrix_abs_full(
    a: &DenseMatrix,
    tol: f64,
    max_iter: usize,
    cond_cap: f64,
    band_tol: f64,
) -> Result<MatrixAbsOutcome> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("matrix_abs: matrix must be square".into()));
    }
    let sym = a.symmetrized();
    if sym.frobenius_norm() == 0.0 {
        return Ok(MatrixAbsOutcome {
            value: DenseMatrix::zeros(a.rows(), a.cols()),
            iterations: 0,
            fallback: false,
            final_delta: 0.0,
        });
    }

    let mut s = sym.clone();
    let mut delta = f64::INFINITY;
    for iter in 0..max_iter {
        let lu = Lu::factor(&s)?;
        if lu.is_singular() || lu.condition_estimate() > cond_cap {
            let value = abs_via_eig(&sym, band_tol)?;
            return Ok(MatrixAbsOutcome { value, iterations: iter, fallback: true, final_delta: 0.0 });
        }
        let inv = lu.inverse()?;
        let c = (inv.frobenius_norm() / s.frobenius_norm()).sqrt();
        let next = s.scale(0.5 * c).add(&inv.scale(0.5 / c))?.symmetrized();
        delta = next.sub(&s)?.frobenius_norm() / next.frobenius_norm().max(f64::MIN_POSITIVE);
        s = next;
        if delta <= tol {
            let value = sym.matmul(&s)?.symmetrized();
            return Ok(MatrixAbsOutcome {
                value,
                iterations: iter + 1,
                fallback: false,
                final_delta: delta,
            });
        }
    }
    // The sign iteration converges quadratically once scaled; running out of
    // iterations means the shift straddles zero too closely. Same remedy as
    // an ill-conditioned solve.
    let value = abs_via_eig(&sym, band_tol)?;
    Ok(MatrixAbsOutcome { value, iterations: max_iter, fallback: true, final_delta: delta })
}

/// `|A|` for symmetric `A` with default safeguards.
pub fn matrix_abs(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<DenseMatrix> {
    let defaults = AbsClipConfig::default();
    Ok(matrix_abs_full(a, tol, max_iter, defaults.cond_cap, defaults.band_tol)?.value)
}

/// Clip via the absolute-value identity, factor side chosen by shape
/// (right for tall, left for wide inputs).
pub fn mclip_abs(m: &DenseMatrix, tau: f64, cfg: &AbsClipConfig) -> Result<ClipResult> {
    let side = if m.rows() >= m.cols() { FactorSide::Right } else { FactorSide::Left };
    mclip_abs_with_side(m, tau, cfg, side)
}

/// Clip via the absolute-value identity on an explicit factor side.
pub fn mclip_abs_with_side(
    m: &DenseMatrix,
    tau: f64,
    cfg: &AbsClipConfig,
    side: FactorSide,
) -> Result<ClipResult> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::NonPositiveTau(tau));
    }
    let mut diagnostics = BTreeMap::new();
    if m.frobenius_norm() == 0.0 {
        return Ok(ClipResult {
            x: m.clone(),
            method: ClipMethod::AbsPolar,
            iterations: 0,
            residual: 0.0,
            diagnostics,
        });
    }

    let polar = polar_newton_schulz(m, cfg.max_iter.max(40), cfg.polar_tol)?;
    let factor = symmetric_factor_from_polar(m, &polar.q, side)?;
    let h = &factor.h;

    let shifted = h.add_diag(-tau);
    let abs_out = matrix_abs_full(&shifted, cfg.abs_tol, cfg.max_iter, cfg.cond_cap, cfg.band_tol)?;

    // P = (H + tau I - |H - tau I|) / 2
    let p = h.add_diag(tau).sub(&abs_out.value)?.scale(0.5).symmetrized();
    let x = match side {
        FactorSide::Right => polar.q.matmul(&p)?,
        FactorSide::Left => p.matmul(&polar.q)?,
    };

    let eig = sym_eig(h)?;
    let min_dist = eig
        .lambda
        .iter()
        .map(|l| (l - tau).abs())
        .fold(f64::INFINITY, f64::min);
    diagnostics.insert("polar_iterations".into(), polar.iterations as f64);
    diagnostics.insert("polar_residual".into(), polar.ortho_residual);
    diagnostics.insert("abs_iterations".into(), abs_out.iterations as f64);
    diagnostics.insert("fallback".into(), if abs_out.fallback { 1.0 } else { 0.0 });
    diagnostics.insert("min_threshold_distance".into(), min_dist);
    diagnostics.insert("converged".into(), if polar.converged { 1.0 } else { 0.0 });

    let residual = polar.ortho_residual * (1.0 + h.frobenius_norm())
        + abs_out.final_delta * (1.0 + shifted.frobenius_norm());
    Ok(ClipResult {
        x,
        method: ClipMethod::AbsPolar,
        iterations: polar.iterations + abs_out.iterations,
        residual,
        diagnostics,
    })
}
