use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A model/case pairing violates the hypotheses of the limit law it is meant to exercise.
    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("renewal simulation exceeded the cap of {cap} arrivals")]
    RenewalCap { cap: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
