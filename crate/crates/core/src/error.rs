use thiserror::Error;

/// Errors produced by the matconc library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("enumeration needs {needed} configurations but the cap is {cap}; use the Monte Carlo estimator")]
    Capacity { needed: u128, cap: u64 },

    #[error(
        "kernel is not degenerate: degeneracy_check residual {residual:.3e} exceeds {tol:.1e}"
    )]
    NotDegenerate { residual: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
