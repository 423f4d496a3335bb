//! Seeded synthesis of matrices with controlled spectra.
//!
//! Everything here is a pure function of its seed: the bench harness and the
//! property tests rely on bitwise reproducibility.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::solve::orthonormal_columns;

/// Standard normal sample via Box-Muller; keeps the RNG stack minimal.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let mut u1: f64 = rng.gen();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    DenseMatrix::new(rows, cols, data).expect("gaussian entries are finite")
}

/// `rows x cols` matrix with orthonormal columns (`cols <= rows`) drawn from
/// the seeded Gaussian ensemble.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<DenseMatrix> {
    if cols > rows {
        return Err(Error::ShapeMismatch(format!(
            "random_orthonormal: need cols <= rows, got {rows}x{cols}"
        )));
    }
    let g = gaussian_matrix(rows, cols, rng);
    orthonormal_columns(&g)
}

/// How the singular values of a synthetic matrix are laid out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SigmaLaw {
    /// Use this exact non-increasing list.
    ExplicitList { values: Vec<f64> },
    /// Uniform draws in `[lo, hi]`, sorted non-increasing.
    UniformRange { lo: f64, hi: f64 },
    /// All values at distance exactly `delta` from `tau`, alternating sides:
    /// the top half sits at `tau + delta`, the rest at `tau - delta`.
    ClusteredAtTau { tau: f64, delta: f64 },
    /// `sigma_i = i^(-exponent)`.
    PowerLaw { exponent: f64 },
}

/// Recipe for one synthetic matrix: shape, spectrum law, seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub rows: usize,
    pub cols: usize,
    pub sigma_law: SigmaLaw,
    pub seed: u64,
}

impl SpectrumSpec {
    /// The singular values this spec produces, sorted non-increasing.
    pub fn sigma_values(&self) -> Result<Vec<f64>> {
        let r = self.rows.min(self.cols);
        if r == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut sigma = match &self.sigma_law {
            SigmaLaw::ExplicitList { values } => {
                if values.len() > r {
                    return Err(Error::InvalidParameter(format!(
                        "explicit list has {} values but min(m,n) = {r}",
                        values.len()
                    )));
                }
                if values.iter().any(|&s| s < 0.0 || !s.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "singular values must be finite and non-negative".into(),
                    ));
                }
                if values.windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::InvalidParameter(
                        "explicit singular values must be non-increasing".into(),
                    ));
                }
                values.clone()
            }
            SigmaLaw::UniformRange { lo, hi } => {
                if *lo < 0.0 || hi < lo {
                    return Err(Error::InvalidParameter("need 0 <= lo <= hi".into()));
                }
                let mut v: Vec<f64> = (0..r).map(|_| rng.gen_range(*lo..=*hi)).collect();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                v
            }
            SigmaLaw::ClusteredAtTau { tau, delta } => {
                if *tau <= 0.0 || *delta < 0.0 || delta >= tau {
                    return Err(Error::InvalidParameter("need 0 <= delta < tau".into()));
                }
                let above = r.div_ceil(2);
                let mut v = vec![tau + delta; above];
                v.extend(std::iter::repeat(tau - delta).take(r - above));
                v
            }
            SigmaLaw::PowerLaw { exponent } => {
                (1..=r).map(|i| (i as f64).powf(-exponent)).collect()
            }
        };
        // Guard against -0.0 noise from the laws above.
        for s in sigma.iter_mut() {
            if *s == 0.0 {
                *s = 0.0;
            }
        }
        Ok(sigma)
    }
}

/// Build `M = U diag(sigma) V^T` with seeded random orthonormal factors.
///
/// Identical specs produce bitwise-identical matrices.
pub fn generate_matrix(spec: &SpectrumSpec) -> Result<DenseMatrix> {
    let sigma = spec.sigma_values()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = sigma.len();
    let u = random_orthonormal(spec.rows, r, &mut rng)?;
    let v = random_orthonormal(spec.cols, r, &mut rng)?;
    let mut scaled = u.clone();
    for i in 0..scaled.rows() {
        for (j, &s) in sigma.iter().enumerate() {
            let val = scaled.get(i, j) * s;
            scaled.set(i, j, val);
        }
    }
    scaled.matmul(&v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svd::{svd_compact, DEFAULT_TRUNC_TOL};

    #[test]
    fn explicit_spectrum_is_reproduced() {
        let spec = SpectrumSpec {
            rows: 5,
            cols: 4,
            sigma_law: SigmaLaw::ExplicitList { values: vec![2.0, 0.5] },
            seed: 7,
        };
        let m = generate_matrix(&spec).unwrap();
        let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
        assert_eq!(f.rank(), 2);
        assert!((f.sigma[0] - 2.0).abs() < 1e-10);
        assert!((f.sigma[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn clustered_law_stays_in_band() {
        let spec = SpectrumSpec {
            rows: 8,
            cols: 8,
            sigma_law: SigmaLaw::ClusteredAtTau { tau: 1.0, delta: 1e-3 },
            seed: 3,
        };
        let m = generate_matrix(&spec).unwrap();
        let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
        assert_eq!(f.rank(), 8);
        for s in &f.sigma {
            assert!(*s >= 1.0 - 1e-3 - 1e-9 && *s <= 1.0 + 1e-3 + 1e-9);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let spec = SpectrumSpec {
            rows: 6,
            cols: 3,
            sigma_law: SigmaLaw::UniformRange { lo: 0.1, hi: 2.0 },
            seed: 42,
        };
        let a = generate_matrix(&spec).unwrap();
        let b = generate_matrix(&spec).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn orthonormal_factor_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_orthonormal(9, 4, &mut rng).unwrap();
        let gram = q.matmul_at_b(&q).unwrap();
        let err = gram.sub(&DenseMatrix::identity(4)).unwrap().max_abs();
        assert!(err < 1e-13);
    }
}
