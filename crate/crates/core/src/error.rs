//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nonzero-mean source for periodic Poisson problem (mean {mean:e}, bound {bound:e})")]
    NonzeroMeanSource { mean: f64, bound: f64 },

    #[error("asymmetric matrix passed to symmetric eigenvalue routine (defect {0:e})")]
    AsymmetricInput(f64),

    #[error("infeasible energy profile: {0}")]
    Infeasible(String),

    #[error("subsolution validation failed: {0}")]
    InvalidSubsolution(String),

    #[error("oscillation stage failed: {0}")]
    StageFailure(String),

    #[error("scheme stage limit reached: {0}")]
    StageLimit(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
