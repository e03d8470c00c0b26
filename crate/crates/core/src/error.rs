use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: lo ({lo}) must be strictly below hi ({hi})")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("entry ({row}, {col}) = {value} lies outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        row: usize,
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("empty sample: {0}")]
    Empty(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bounds mismatch: [{0}, {1}] vs [{2}, {3}]")]
    BoundsMismatch(f64, f64, f64, f64),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("missing class {0}")]
    MissingClass(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: {what} is not finite")]
    Diverged {
        epoch: usize,
        step: usize,
        what: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
