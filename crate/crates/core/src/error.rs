use thiserror::Error;

/// Errors produced by kernel evaluation, GP regression and aggregation.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: String,
        reason: String,
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("Cholesky factorization failed (matrix not positive definite after jitter up to {max_jitter:e})")]
    CholeskyFailure { max_jitter: f64 },

    #[error("information set holds a record with eta = {eta} >= beta*sigma_f = {bound}; run manage_information_set first")]
    UnmanagedRecord { eta: f64, bound: f64 },

    #[error("{aggregator} requires a non-empty information set")]
    EmptyInformationSet { aggregator: &'static str },

    #[error("error bound omega(t) is only defined for AsyncDGP results")]
    BoundNotApplicable,
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn invalid(name: &str, value: impl std::fmt::Display, reason: &str) -> Self {
        CoreError::InvalidParameter {
            name: name.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }
}
