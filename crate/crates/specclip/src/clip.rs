//! Exact singular-value clipping.
//!
//! `mclip_exact` maps every singular value through `min(sigma, tau)`: the
//! Frobenius projection onto the spectral-norm ball of radius `tau`. It is
//! the oracle the approximate kernels are measured against. The module also
//! exposes the rank-k correction form `M - U_> diag(sigma_i - tau) V_>^T`
//! over the violating directions, which the low-rank path reuses.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::svd::{svd_compact, DEFAULT_TRUNC_TOL};

/// Which kernel produced a clipped matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMethod {
    Exact,
    AbsPolar,
    RationalFilter,
    LowRankDeflate,
}

impl ClipMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClipMethod::Exact => "exact",
            ClipMethod::AbsPolar => "abs_polar",
            ClipMethod::RationalFilter => "rational_filter",
            ClipMethod::LowRankDeflate => "lowrank_deflate",
        }
    }
}

/// A clipped matrix plus convergence bookkeeping.
///
/// `residual` is method specific: reconstruction error proxy for the exact
/// path, final iteration residuals for the iterative kernels, the sketch
/// residual for low-rank deflation. `diagnostics` carries named scalars
/// (iteration counts, condition estimates, threshold distances).
#[derive(Debug, Clone)]
pub struct ClipResult {
    pub x: DenseMatrix,
    pub method: ClipMethod,
    pub iterations: usize,
    pub residual: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

/// The violating index set of a spectrum at threshold `tau`.
///
/// Indices with `sigma_i > tau` strictly; values exactly at the threshold
/// are feasible and left alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPlan {
    pub tau: f64,
    pub violating_indices: Vec<usize>,
    pub k_over: usize,
    pub excess: Vec<f64>,
}

/// Identify the singular values strictly above `tau`.
pub fn clip_plan(sigma: &[f64], tau: f64) -> Result<ClipPlan> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::NonPositiveTau(tau));
    }
    let mut violating_indices = Vec::new();
    let mut excess = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s > tau {
            violating_indices.push(i);
            excess.push(s - tau);
        }
    }
    Ok(ClipPlan { tau, k_over: violating_indices.len(), violating_indices, excess })
}

/// Rank-k correction `M - U_> diag(excess) V_>^T`.
///
/// `u_over` and `v_over` hold the violating singular directions as columns;
/// with zero violating directions (`excess` empty) the input is returned
/// unchanged and the factor arguments may be `None`.
pub fn lowrank_correction_assemble(
    m: &DenseMatrix,
    u_over: Option<&DenseMatrix>,
    v_over: Option<&DenseMatrix>,
    excess: &[f64],
) -> Result<DenseMatrix> {
    if excess.is_empty() {
        return Ok(m.clone());
    }
    let (u, v) = match (u_over, v_over) {
        (Some(u), Some(v)) => (u, v),
        _ => {
            return Err(Error::ShapeMismatch(
                "lowrank_correction_assemble: factors required when excess is non-empty".into(),
            ))
        }
    };
    let k = excess.len();
    if u.cols() != k || v.cols() != k || u.rows() != m.rows() || v.rows() != m.cols() {
        return Err(Error::ShapeMismatch(format!(
            "lowrank_correction_assemble: m {}x{}, u {}x{}, v {}x{}, k {}",
            m.rows(),
            m.cols(),
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols(),
            k
        )));
    }
    let mut scaled = u.clone();
    for i in 0..scaled.rows() {
        for (j, &e) in excess.iter().enumerate() {
            let val = scaled.get(i, j) * e;
            scaled.set(i, j, val);
        }
    }
    let correction = scaled.matmul(&v.transpose())?;
    m.sub(&correction)
}

/// Exact clipping through the SVD oracle.
///
/// Zero input maps to zero by convention.
pub fn mclip_exact(m: &DenseMatrix, tau: f64) -> Result<ClipResult> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::NonPositiveTau(tau));
    }
    let mut diagnostics = BTreeMap::new();
    if m.frobenius_norm() == 0.0 {
        diagnostics.insert("k_over".into(), 0.0);
        return Ok(ClipResult {
            x: m.clone(),
            method: ClipMethod::Exact,
            iterations: 0,
            residual: 0.0,
            diagnostics,
        });
    }
    let f = svd_compact(m, DEFAULT_TRUNC_TOL)?;
    let plan = clip_plan(&f.sigma, tau)?;
    diagnostics.insert("k_over".into(), plan.k_over as f64);
    let min_dist = f
        .sigma
        .iter()
        .map(|s| (s - tau).abs())
        .fold(f64::INFINITY, f64::min);
    diagnostics.insert("min_threshold_distance".into(), min_dist);

    let x = if plan.k_over == 0 {
        m.clone()
    } else {
        let k = plan.k_over;
        let mut u_over = DenseMatrix::zeros(m.rows(), k);
        let mut v_over = DenseMatrix::zeros(m.cols(), k);
        for (col, &idx) in plan.violating_indices.iter().enumerate() {
            for i in 0..m.rows() {
                u_over.set(i, col, f.u.get(i, idx));
            }
            for i in 0..m.cols() {
                v_over.set(i, col, f.v.get(i, idx));
            }
        }
        lowrank_correction_assemble(m, Some(&u_over), Some(&v_over), &plan.excess)?
    };
    Ok(ClipResult {
        x,
        method: ClipMethod::Exact,
        iterations: 0,
        residual: 0.0,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::spectral_norm;
    use crate::synth::{generate_matrix, SigmaLaw, SpectrumSpec};

    #[test]
    fn diagonal_clip() {
        let m = DenseMatrix::from_diag(&[2.0, 0.5]);
        let r = mclip_exact(&m, 1.0).unwrap();
        let expected = DenseMatrix::from_diag(&[1.0, 0.5]);
        assert!(r.x.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = DenseMatrix::zeros(3, 2);
        let r = mclip_exact(&z, 1.0).unwrap();
        assert!(r.x.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let m = DenseMatrix::identity(2);
        assert!(matches!(mclip_exact(&m, 0.0), Err(Error::NonPositiveTau(_))));
        assert!(matches!(mclip_exact(&m, -1.0), Err(Error::NonPositiveTau(_))));
    }

    #[test]
    fn random_factors_clip_spectrum() {
        let spec = SpectrumSpec {
            rows: 6,
            cols: 5,
            sigma_law: SigmaLaw::ExplicitList { values: vec![3.0, 2.0, 0.5] },
            seed: 123,
        };
        let m = generate_matrix(&spec).unwrap();
        let r = mclip_exact(&m, 1.0).unwrap();
        let f = svd_compact(&r.x, DEFAULT_TRUNC_TOL).unwrap();
        let expected = [1.0, 1.0, 0.5];
        assert_eq!(f.rank(), 3);
        for (got, want) in f.sigma.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "sigma {got} vs {want}");
        }
        assert!(spectral_norm(&r.x) <= 1.0 + 1e-10);
    }

    #[test]
    fn plan_counts_strict_violations() {
        let plan = clip_plan(&[3.0, 2.0, 0.5], 1.0).unwrap();
        assert_eq!(plan.k_over, 2);
        assert_eq!(plan.excess, vec![2.0, 1.0]);

        let none = clip_plan(&[0.9, 0.5], 1.0).unwrap();
        assert_eq!(none.k_over, 0);

        // Values exactly at tau are feasible.
        let boundary = clip_plan(&[1.0, 1.0], 1.0).unwrap();
        assert_eq!(boundary.k_over, 0);
    }

    #[test]
    fn assemble_with_no_violations_is_identity() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = lowrank_correction_assemble(&m, None, None, &[]).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn assemble_diagonal_example() {
        let m = DenseMatrix::from_diag(&[3.0, 0.5]);
        let e1 = DenseMatrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        let out = lowrank_correction_assemble(&m, Some(&e1), Some(&e1), &[2.0]).unwrap();
        let expected = DenseMatrix::from_diag(&[1.0, 0.5]);
        assert!(out.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn assemble_matches_exact_from_oracle_subspace() {
        let spec = SpectrumSpec {
            rows: 7,
            cols: 7,
            sigma_law: SigmaLaw::UniformRange { lo: 0.2, hi: 3.0 },
            seed: 5,
        };
        let m = generate_matrix(&spec).unwrap();
        let tau = 1.0;
        let exact = mclip_exact(&m, tau).unwrap();
        let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
        let plan = clip_plan(&f.sigma, tau).unwrap();
        let k = plan.k_over;
        if k == 0 {
            return;
        }
        let mut u_over = DenseMatrix::zeros(7, k);
        let mut v_over = DenseMatrix::zeros(7, k);
        for (col, &idx) in plan.violating_indices.iter().enumerate() {
            for i in 0..7 {
                u_over.set(i, col, f.u.get(i, idx));
                v_over.set(i, col, f.v.get(i, idx));
            }
        }
        let assembled =
            lowrank_correction_assemble(&m, Some(&u_over), Some(&v_over), &plan.excess).unwrap();
        let diff = assembled.sub(&exact.x).unwrap().frobenius_norm();
        assert!(diff < 1e-10, "identity violated by {diff}");
    }
}
