use thiserror::Error;

/// Errors raised by the measure, transport and metric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },

    #[error("negative weight {value} at atom {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("null measure not allowed here: {0}")]
    NullMeasure(&'static str),

    #[error("total masses differ: {source_mass} vs {target_mass}")]
    UnequalMass { source_mass: f64, target_mass: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("inconsistent path at step {step}: {reason}")]
    InconsistentPath { step: usize, reason: String },

    #[error("{0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
