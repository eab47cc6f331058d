use thiserror::Error;

use crate::models::Family;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("observation {value} is outside the support of the {family} family")]
    Domain { family: Family, value: f64 },

    #[error("model families differ: {left} vs {right}")]
    FamilyMismatch { left: Family, right: Family },

    #[error("operation `{operation}` is not supported for the {family} family")]
    UnsupportedFamily {
        family: Family,
        operation: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("non-finite increment {0}")]
    NonFinite(f64),

    #[error("window length mismatch: expected {expected}, got {actual}")]
    WindowLength { expected: usize, actual: usize },

    #[error("insufficient data: need at least {needed} observations, got {available}")]
    InsufficientData { needed: usize, available: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
