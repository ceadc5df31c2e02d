use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("horizon exceeded: requested {requested}, available {available}")]
    HorizonExceeded { requested: usize, available: usize },

    #[error("contraction violated: {0}")]
    ContractionViolation(String),

    #[error("degenerate sector: {0}")]
    DegenerateSector(String),

    #[error("algebraic loop: controller has nonzero feedthrough, use the transformed loop instead")]
    AlgebraicLoop,

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iteration diverged at step {iteration}")]
    Divergence {
        iteration: usize,
        last_finite: Vec<f64>,
    },

    #[error("line search failed after {halvings} reductions")]
    LineSearchFailure { halvings: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::shape(format!("dimension {expected}"), format!("dimension {got}")))
    }
}
