use thiserror::Error;

/// Errors produced by the optimizer, the chain simulator and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("NaN in input at index {0}")]
    NanInput(usize),

    #[error("non-finite objective value {value} at t={t}")]
    Evaluation { t: u64, value: f64, x: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("normalized chain reached 0 at t={t}")]
    DegenerateChain { t: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error ({location}): {message}")]
    Config { location: String, message: String },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_replicate(self, replicate: u64) -> Self {
        Error::Replicate {
            replicate,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
