use thiserror::Error;

use crate::models::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("model validation failed: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("non-finite state on path {path} at step {step}")]
    NonFiniteState { path: usize, step: usize },

    #[error("likelihood weight exp({log_weight:.3}) on path {path} exceeds the exp({limit}) guard; drift too large")]
    WeightOverflow {
        path: usize,
        log_weight: f64,
        limit: f64,
    },

    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("parameter sampling exhausted {retries} retries; binding constraint: {constraint}")]
    SamplingExhausted { retries: usize, constraint: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("mismatched reports: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Checkpoint(_)
            | Error::InvalidParameter { .. }
            | Error::Unsupported(_)
            | Error::DimensionMismatch { .. }
            | Error::Mismatch(_) => 2,
            Error::Validation(_) | Error::SamplingExhausted { .. } => 4,
            Error::NonFinite(_)
            | Error::NonFiniteState { .. }
            | Error::WeightOverflow { .. }
            | Error::Diverged { .. } => 3,
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
