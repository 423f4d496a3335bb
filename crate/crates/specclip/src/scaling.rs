//! Width-depth scaling recipes and the matrix optimizer step.
//!
//! Three recipes are resolved per parameter group: width-only muP AdamW,
//! joint width-depth CompleteP AdamW, and the SpectralP convention where
//! hidden 2D matrix groups take a spectral direction (polar or clipped) and
//! every other group stays an AdamW companion. Multipliers are expressed in
//! `m_N = N / N_base` and `m_L = L / L_base`; the base model resolves to the
//! base hyperparameters exactly.
//!
//! The hidden-matrix step follows the RMS-matching convention: the group
//! learning-rate multiplier stays one and the applied coefficient is
//! `eta * kappa(m, n)` with `kappa = rho_match * sqrt(max(m, n))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::absclip::{mclip_abs, AbsClipConfig};
use crate::clip::{mclip_exact, ClipResult};
use crate::error::{Error, Result};
use crate::lowrank::{mclip_lowrank, LowRankConfig};
use crate::matrix::DenseMatrix;
use crate::polar::{polar_exact, polar_newton_schulz, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::ratfilter::{mclip_rational, RationalFilterConfig};

/// Spectral post-processing applied to hidden matrix directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// `Pol(B) = U V^T`: every nonzero singular value becomes one.
    MuonPolar,
    /// `MClip_tau(B)`: singular values above `tau` are clipped, the rest
    /// pass through untouched.
    MuconClip,
}

/// Base hyperparameters plus the width/depth scale of the target model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub eta_base: f64,
    pub sigma_base_sq: f64,
    pub lambda_base: f64,
    pub eps_base: f64,
    /// RMS-matching coefficient (`matched_adamw_rms` convention).
    pub rho_match: f64,
    /// Embedding/unembedding learning-rate multiplier.
    pub gamma_emb: f64,
    pub tau: f64,
    pub n_base: usize,
    pub l_base: usize,
    pub n: usize,
    pub l: usize,
    /// Residual exponent in [1/2, 1].
    pub alpha: f64,
    pub tied_embeddings: bool,
    pub direction_mode: DirectionMode,
    /// Compute the direction on `beta * B_t + G_t` instead of `B_t`.
    #[serde(default)]
    pub nesterov: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            eta_base: 0.02,
            sigma_base_sq: 1.0,
            lambda_base: 0.1,
            eps_base: 1e-8,
            rho_match: 1.0,
            gamma_emb: 1.0,
            tau: 1.0,
            n_base: 128,
            l_base: 2,
            n: 128,
            l: 2,
            alpha: 1.0,
            tied_embeddings: false,
            direction_mode: DirectionMode::MuconClip,
            nesterov: false,
        }
    }
}

impl ScalingConfig {
    pub fn m_n(&self) -> f64 {
        self.n as f64 / self.n_base as f64
    }

    pub fn m_l(&self) -> f64 {
        self.l as f64 / self.l_base as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_base == 0 || self.l_base == 0 || self.n == 0 || self.l == 0 {
            return Err(Error::InvalidParameter("widths and depths must be positive".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::NonPositiveTau(self.tau));
        }
        if self.rho_match <= 0.0 {
            return Err(Error::InvalidParameter("rho_match must be positive".into()));
        }
        if !(0.5..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [1/2, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Scaling recipes with resolvable multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    MupAdamw,
    CompletepAdamw,
    Spectralp,
}

impl Recipe {
    pub const ALL: [Recipe; 3] = [Recipe::MupAdamw, Recipe::CompletepAdamw, Recipe::Spectralp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Recipe::MupAdamw => "mup_adamw",
            Recipe::CompletepAdamw => "completep_adamw",
            Recipe::Spectralp => "spectralp",
        }
    }
}

/// Parameter group taxonomy. Every parameter maps to exactly one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroupKind {
    HiddenMatrix,
    Embedding,
    Unembedding,
    HiddenLayernorm,
    HiddenBias,
    HiddenVector,
    FinalLayernorm,
}

impl ParamGroupKind {
    pub const ALL: [ParamGroupKind; 7] = [
        ParamGroupKind::HiddenMatrix,
        ParamGroupKind::Embedding,
        ParamGroupKind::Unembedding,
        ParamGroupKind::HiddenLayernorm,
        ParamGroupKind::HiddenBias,
        ParamGroupKind::HiddenVector,
        ParamGroupKind::FinalLayernorm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamGroupKind::HiddenMatrix => "hidden_matrix",
            ParamGroupKind::Embedding => "embedding",
            ParamGroupKind::Unembedding => "unembedding",
            ParamGroupKind::HiddenLayernorm => "hidden_layernorm",
            ParamGroupKind::HiddenBias => "hidden_bias",
            ParamGroupKind::HiddenVector => "hidden_vector",
            ParamGroupKind::FinalLayernorm => "final_layernorm",
        }
    }
}

/// Resolved per-group hyperparameters.
///
/// `adamw_eps` is `None` exactly for the SpectralP hidden matrix group,
/// which takes the spectral step and has no AdamW denominator.
/// `forward_multiplier` carries the residual branch factor (`m_L^-alpha`)
/// or the output factor (`m_N^-1`) where one applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHyperparams {
    pub lr: f64,
    pub weight_decay: f64,
    pub adamw_eps: Option<f64>,
    pub init_variance: f64,
    pub forward_multiplier: Option<f64>,
}

/// Resolve one (kind, recipe) cell of the scaling table.
pub fn resolve_group(kind: ParamGroupKind, recipe: Recipe, cfg: &ScalingConfig) -> GroupHyperparams {
    let m_n = cfg.m_n();
    let m_l = cfg.m_l();
    let alpha = cfg.alpha;
    let eta = cfg.eta_base;
    let lambda = cfg.lambda_base;
    let eps = cfg.eps_base;
    let var = cfg.sigma_base_sq;

    match kind {
        ParamGroupKind::HiddenMatrix => match recipe {
            Recipe::MupAdamw => GroupHyperparams {
                lr: eta / m_n,
                weight_decay: lambda * m_n,
                adamw_eps: Some(eps / m_n),
                init_variance: var / m_n,
                forward_multiplier: Some(1.0),
            },
            Recipe::CompletepAdamw => GroupHyperparams {
                lr: eta / m_n * m_l.powf(alpha - 1.0),
                weight_decay: lambda * m_n,
                adamw_eps: Some(eps / m_n * m_l.powf(-alpha)),
                init_variance: var / m_n,
                forward_multiplier: Some(m_l.powf(-alpha)),
            },
            Recipe::Spectralp => GroupHyperparams {
                lr: eta,
                weight_decay: lambda,
                adamw_eps: None,
                init_variance: var / m_n,
                forward_multiplier: Some(m_l.powf(-alpha)),
            },
        },
        ParamGroupKind::Embedding => GroupHyperparams {
            lr: cfg.gamma_emb * eta,
            weight_decay: lambda,
            adamw_eps: Some(eps / m_n),
            init_variance: var,
            forward_multiplier: None,
        },
        ParamGroupKind::Unembedding => GroupHyperparams {
            lr: cfg.gamma_emb * eta,
            weight_decay: lambda,
            adamw_eps: Some(eps / m_n),
            init_variance: var,
            forward_multiplier: Some(1.0 / m_n),
        },
        ParamGroupKind::HiddenLayernorm | ParamGroupKind::HiddenBias | ParamGroupKind::HiddenVector => {
            let (lr, eps_eff) = match recipe {
                Recipe::MupAdamw => (eta, eps / m_n),
                Recipe::CompletepAdamw | Recipe::Spectralp => {
                    (eta * m_l.powf(alpha - 1.0), eps / m_n * m_l.powf(-alpha))
                }
            };
            GroupHyperparams {
                lr,
                weight_decay: 0.0,
                adamw_eps: Some(eps_eff),
                init_variance: 0.0,
                forward_multiplier: None,
            }
        }
        ParamGroupKind::FinalLayernorm => GroupHyperparams {
            lr: eta,
            weight_decay: 0.0,
            adamw_eps: Some(eps / m_n),
            init_variance: 0.0,
            forward_multiplier: None,
        },
    }
}

/// Shape-dependent RMS-matching multiplier `rho * sqrt(max(m, n))`.
pub fn kappa_muon(m: usize, n: usize, rho_match: f64) -> f64 {
    rho_match * (m.max(n) as f64).sqrt()
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    /// Matrix momentum buffer for Muon/MuCon groups.
    Momentum { buffer: DenseMatrix },
    /// AdamW first/second moments plus step count for companion groups.
    AdamW { m: DenseMatrix, v: DenseMatrix, step: u64 },
}

impl OptimizerState {
    pub fn momentum_like(param: &DenseMatrix) -> Self {
        OptimizerState::Momentum { buffer: DenseMatrix::zeros(param.rows(), param.cols()) }
    }

    pub fn adamw_like(param: &DenseMatrix) -> Self {
        OptimizerState::AdamW {
            m: DenseMatrix::zeros(param.rows(), param.cols()),
            v: DenseMatrix::zeros(param.rows(), param.cols()),
            step: 0,
        }
    }
}

/// Which clipping kernel backs the MuCon direction (exact clip also serves
/// the polar mode as the oracle path).
#[derive(Debug, Clone)]
pub enum ClipKernel {
    Exact,
    AbsPolar(AbsClipConfig),
    Rational(RationalFilterConfig),
    LowRank(LowRankConfig),
}

impl Default for ClipKernel {
    fn default() -> Self {
        ClipKernel::Exact
    }
}

/// Direction plus kernel diagnostics.
#[derive(Debug, Clone)]
pub struct DirectionResult {
    pub direction: DenseMatrix,
    pub diagnostics: BTreeMap<String, f64>,
}

fn clip_with_kernel(b: &DenseMatrix, tau: f64, kernel: &ClipKernel) -> Result<ClipResult> {
    match kernel {
        ClipKernel::Exact => mclip_exact(b, tau),
        ClipKernel::AbsPolar(cfg) => mclip_abs(b, tau, cfg),
        ClipKernel::Rational(cfg) => mclip_rational(b, tau, cfg),
        ClipKernel::LowRank(cfg) => mclip_lowrank(b, tau, cfg),
    }
}

/// Update the momentum buffer `B <- beta B + G` and return the spectral
/// direction for the configured mode.
pub fn muon_direction(
    state: &mut OptimizerState,
    grad: &DenseMatrix,
    momentum_beta: f64,
    cfg: &ScalingConfig,
    kernel: &ClipKernel,
) -> Result<DirectionResult> {
    let buffer = match state {
        OptimizerState::Momentum { buffer } => buffer,
        OptimizerState::AdamW { .. } => return Err(Error::StateMismatch),
    };
    if buffer.rows() != grad.rows() || buffer.cols() != grad.cols() {
        return Err(Error::ShapeMismatch("muon_direction: grad vs buffer".into()));
    }
    *buffer = buffer.scale(momentum_beta).add(grad)?;
    let basis = if cfg.nesterov {
        buffer.scale(momentum_beta).add(grad)?
    } else {
        buffer.clone()
    };

    let mut diagnostics = BTreeMap::new();
    let direction = match cfg.direction_mode {
        DirectionMode::MuonPolar => {
            if basis.frobenius_norm() == 0.0 {
                basis
            } else {
                let polar = match kernel {
                    ClipKernel::Exact => polar_exact(&basis)?,
                    _ => polar_newton_schulz(&basis, DEFAULT_MAX_ITER, DEFAULT_TOL)?,
                };
                diagnostics.insert("polar_iterations".into(), polar.iterations as f64);
                diagnostics.insert("polar_residual".into(), polar.ortho_residual);
                diagnostics
                    .insert("converged".into(), if polar.converged { 1.0 } else { 0.0 });
                polar.q
            }
        }
        DirectionMode::MuconClip => {
            let clip = clip_with_kernel(&basis, cfg.tau, kernel)?;
            diagnostics.insert("clip_iterations".into(), clip.iterations as f64);
            diagnostics.insert("clip_residual".into(), clip.residual);
            for (k, v) in &clip.diagnostics {
                diagnostics.insert(format!("clip_{k}"), *v);
            }
            clip.x
        }
    };
    Ok(DirectionResult { direction, diagnostics })
}

/// Apply the hidden-matrix step
/// `param <- param (1 - lr wd) - lr kappa(m, n) direction`
/// (decoupled weight decay applied multiplicatively before the direction).
pub fn apply_matrix_step(
    param: &DenseMatrix,
    direction: &DenseMatrix,
    hp: &GroupHyperparams,
    cfg: &ScalingConfig,
) -> Result<DenseMatrix> {
    if param.rows() != direction.rows() || param.cols() != direction.cols() {
        return Err(Error::ShapeMismatch("apply_matrix_step: direction shape".into()));
    }
    let kappa = kappa_muon(param.rows(), param.cols(), cfg.rho_match);
    let decayed = param.scale(1.0 - hp.lr * hp.weight_decay);
    decayed.sub(&direction.scale(hp.lr * kappa))
}

/// Standard decoupled-weight-decay AdamW step with bias correction for the
/// companion groups. `beta1`/`beta2` are explicit because the scaling
/// recipes do not scale them.
pub fn adamw_companion_step(
    param: &DenseMatrix,
    grad: &DenseMatrix,
    state: &mut OptimizerState,
    hp: &GroupHyperparams,
    beta1: f64,
    beta2: f64,
) -> Result<DenseMatrix> {
    let eps = hp.adamw_eps.ok_or(Error::MissingEpsilon)?;
    let (m, v, step) = match state {
        OptimizerState::AdamW { m, v, step } => (m, v, step),
        OptimizerState::Momentum { .. } => return Err(Error::StateMismatch),
    };
    if param.rows() != grad.rows() || param.cols() != grad.cols() {
        return Err(Error::ShapeMismatch("adamw_companion_step: grad shape".into()));
    }
    *step += 1;
    let t = *step;
    *m = m.scale(beta1).add(&grad.scale(1.0 - beta1))?;
    let grad_sq = DenseMatrix::new(
        grad.rows(),
        grad.cols(),
        grad.data().iter().map(|g| g * g).collect(),
    )?;
    *v = v.scale(beta2).add(&grad_sq.scale(1.0 - beta2))?;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);

    let mut update = DenseMatrix::zeros(param.rows(), param.cols());
    for i in 0..param.rows() {
        for j in 0..param.cols() {
            let m_hat = m.get(i, j) / bc1;
            let v_hat = v.get(i, j) / bc2;
            update.set(i, j, m_hat / (v_hat.sqrt() + eps));
        }
    }
    let decayed = param.scale(1.0 - hp.lr * hp.weight_decay);
    decayed.sub(&update.scale(hp.lr))
}

/// Tied-embedding logits `m_N^{-1} E h`: the output multiplier that keeps
/// the self-overlap term width-independent.
pub fn tied_logit_scale(e: &DenseMatrix, h: &[f64], m_n: f64) -> Result<Vec<f64>> {
    if m_n <= 0.0 {
        return Err(Error::InvalidParameter("m_n must be positive".into()));
    }
    let logits = e.apply(h)?;
    Ok(logits.into_iter().map(|x| x / m_n).collect())
}
