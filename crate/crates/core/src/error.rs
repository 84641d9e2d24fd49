use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or sampler parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The evaluation point lies outside the supported domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or series failed to reach its tolerance.
    #[error("numerical failure in {context}: estimate {estimate:e}, error {error:e}, requested {requested:e} ({detail})")]
    Numerical {
        context: String,
        estimate: f64,
        error: f64,
        requested: f64,
        detail: String,
    },

    /// A caller violated a documented precondition (missing derivative, missing support...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    /// A precomputed table failed its validation pass.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors produced by numerical non-convergence.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
