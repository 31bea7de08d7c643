use thiserror::Error;

use crate::flow::FlowState;

#[derive(Debug, Error)]
pub enum IclError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("matrix contains non-finite entries")]
    NonFiniteInput,

    #[error("no positive eigenvalue")]
    NoPositiveEigenvalue,

    #[error("Ω singular: tr(HΨ) + σ² = {value:.3e} must be positive")]
    SingularOmega { value: f64 },

    #[error("invalid task specification: {0}")]
    InvalidSpec(String),

    #[error("invalid LTB weights: {0}")]
    InvalidWeights(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all {restarts} restarts produced a non-finite risk")]
    SearchFailed { restarts: usize },

    #[error("non-finite state at t = {t}; step size is too large")]
    NonFiniteState { t: f64, last_finite: Box<FlowState> },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IclError {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        IclError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        IclError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, IclError>;
