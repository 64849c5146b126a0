use thiserror::Error;

use crate::model::Estimate;

pub type Result<T> = std::result::Result<T, CovselError>;

#[derive(Debug, Error)]
pub enum CovselError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("data error: {0}")]
    Data(String),

    /// A matrix that must be positive definite failed to factor.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate variance in column {column}")]
    DegenerateVariance { column: usize },

    /// The outer solver ran out of iterations. The last iterate is kept so
    /// callers can still inspect or emit it.
    #[error("solver did not reach the gap target after {iterations} iterations (gap {gap:.3e})")]
    Convergence {
        estimate: Box<Estimate>,
        gap: f64,
        iterations: usize,
    },

    #[error("inner solver did not converge after {iterations} passes (last change {change:.3e})")]
    InnerConvergence { iterations: usize, change: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
