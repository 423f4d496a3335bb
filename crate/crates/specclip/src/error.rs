use thiserror::Error;

/// Errors produced by the dense kernels and clipping operators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be positive")]
    EmptyMatrix,
    #[error("data length {got} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero matrix is not a valid input here")]
    ZeroMatrix,
    #[error("{algorithm} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "coefficient solve is numerically singular (min pivot {min_pivot:.3e}); \
         set reg_mu > 0 to regularize the iteration"
    )]
    SingularSolve { min_pivot: f64 },
    #[error(
        "rank budget exhausted at {budget}: smallest retained singular estimate {sigma_min:.6e} \
         still exceeds tau = {tau}; too many violating directions, use a global method"
    )]
    BudgetExhausted { budget: usize, sigma_min: f64, tau: f64 },
    #[error("optimizer state does not match the requested update")]
    StateMismatch,
    #[error("adamw_eps is required for AdamW companion groups but was not resolved")]
    MissingEpsilon,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
