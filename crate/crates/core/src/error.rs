//! Error type shared by all solver modules.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on the arguments does not hold.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Right-hand side is identically zero where a nonzero one is required.
    #[error("degenerate right-hand side: {0}")]
    DegenerateRhs(String),

    /// An alternating-sweep iterate collapsed to zero.
    #[error("degenerate iterate: {0}")]
    DegenerateIterate(String),

    /// The reference field in an error norm has zero norm.
    #[error("degenerate reference field (zero norm)")]
    DegenerateReference,

    /// A linear solve broke down or failed its residual check.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Extreme-eigenvalue estimation did not converge within its cap.
    #[error("spectral estimation failure: {0}")]
    EstimationFailure(String),

    /// The exponential-sum optimizer did not converge; carries the
    /// best-effort sup error it reached.
    #[error("exponential-sum fit failure: best eps {best_eps}")]
    FitFailure { best_eps: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
