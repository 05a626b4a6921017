use thiserror::Error;

/// Errors produced by the filtering pipeline.
#[derive(Debug, Error)]
pub enum RdsError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "numerical instability at step {step} (tau = {tau:e}): values left [{lo:e}, {hi:e}], observed [{min:e}, {max:e}]"
    )]
    Instability {
        step: usize,
        tau: f64,
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
}

pub type Result<T> = std::result::Result<T, RdsError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RdsError {
    RdsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> RdsError {
    RdsError::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
