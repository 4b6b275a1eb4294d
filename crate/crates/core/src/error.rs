use thiserror::Error;

/// Errors raised by the estimators and their inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("k_perp = {kperp} lies outside the propagating domain [0, {k}]")]
    OutOfDomain { kperp: f64, k: f64 },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("spectral tail mass {tail:.3e} (relative) exceeds accuracy budget {budget:.1e}")]
    AccuracyLoss { tail: f64, budget: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("truncation: leaked fraction {leaked:.3e} exceeds {budget:.1e} ({what})")]
    Truncation {
        leaked: f64,
        budget: f64,
        what: String,
    },

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
