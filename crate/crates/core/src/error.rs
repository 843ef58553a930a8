//! Crate-wide error type.

use thiserror::Error;

use crate::fields::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    /// Evaluation left the domain of an elementary function.
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },

    #[error("jet order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("invalid chart: {0}")]
    Chart(String),

    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("degenerate {what} at {point:?}")]
    Degenerate { what: String, point: Vec<f64> },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("extrapolation failed: {0}")]
    Extrapolation(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
