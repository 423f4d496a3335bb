//! Singular-value clipping without a full SVD — and the bookkeeping that
//! makes the clipped direction usable inside a width-depth scaled optimizer.
//!
//! The central operator is
//!
//! ```text
//! MClip_tau(M) = U diag(min(sigma_i, tau)) V^T,   M = U diag(sigma_i) V^T,
//! ```
//!
//! the Frobenius projection onto the spectral-norm ball of radius `tau`. The
//! crate provides the exact operator through a one-sided Jacobi SVD oracle
//! ([`clip::mclip_exact`]) and three SVD-free approximations:
//!
//! * [`absclip::mclip_abs`] — polar factor plus matrix absolute value,
//!   `Q (H + tau I - |H - tau I|) / 2`;
//! * [`ratfilter::mclip_rational`] — a rational Newton filter for the
//!   clipped PSD factor, assembled through `M g_tau(H)`;
//! * [`lowrank::mclip_lowrank`] — randomized deflation of the violating
//!   subspace via the rank-k correction identity.
//!
//! [`scaling`] resolves muP / CompleteP / SpectralP hyperparameter
//! multipliers per parameter group and implements the Muon/MuCon matrix step
//! with the RMS-matching coefficient. [`synth`] generates seeded matrices
//! with controlled spectra for benchmarks and tests.
//!
//! A worked guide lives in `book/`; its code blocks compile and run as part
//! of this crate's doctests.

pub mod absclip;
pub mod clip;
pub mod eig;
pub mod error;
pub mod io;
pub mod lowrank;
pub mod matrix;
pub mod norms;
pub mod polar;
pub mod ratfilter;
pub mod scaling;
pub mod solve;
pub mod svd;
pub mod synth;

pub use absclip::{
    matrix_abs, matrix_abs_full, mclip_abs, mclip_abs_with_side, symmetric_factor_from_polar,
    AbsClipConfig, FactorSide, MatrixAbsOutcome, SymmetricFactor,
};
pub use clip::{clip_plan, lowrank_correction_assemble, mclip_exact, ClipMethod, ClipPlan, ClipResult};
pub use eig::{sym_eig, SymEig};
pub use error::{Error, Result};
pub use lowrank::{mclip_lowrank, randomized_range, LowRankConfig, SubspaceSketch};
pub use matrix::DenseMatrix;
pub use norms::{rms_operator_norm, rms_vector_norm, spectral_norm};
pub use polar::{polar, polar_exact, polar_newton_schulz, PolarMethod, PolarResult};
pub use ratfilter::{
    g_tau_apply, g_tau_apply_polar_cross, g_tau_scalar, mclip_rational, rational_filter_psd,
    scalar_clip_newton, RationalFilterConfig, RationalFilterOutcome, ScalarNewtonTrace,
};
pub use scaling::{
    adamw_companion_step, apply_matrix_step, kappa_muon, muon_direction, resolve_group,
    tied_logit_scale, ClipKernel, DirectionMode, DirectionResult, GroupHyperparams,
    OptimizerState, ParamGroupKind, Recipe, ScalingConfig,
};
pub use svd::{svd_compact, SvdFactorization, DEFAULT_TRUNC_TOL};
pub use synth::{gaussian_matrix, generate_matrix, random_orthonormal, SigmaLaw, SpectrumSpec};
