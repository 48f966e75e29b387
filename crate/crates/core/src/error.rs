use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TrpError>;

#[derive(Debug, Error)]
pub enum TrpError {
    #[error("rank deficiency in {context}: smallest/largest singular value ratio {ratio:e}")]
    RankDeficient { context: String, ratio: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("step size error: {0}")]
    StepSize(String),

    #[error("slice sampler step-out exceeded {0} doublings")]
    SliceStepOut(usize),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<TrpError>,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl TrpError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            TrpError::RankDeficient { .. }
            | TrpError::Singular(_)
            | TrpError::NotPositiveDefinite(_)
            | TrpError::NonConvergence { .. }
            | TrpError::Degenerate(_)
            | TrpError::StepSize(_)
            | TrpError::SliceStepOut(_) => true,
            TrpError::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> TrpError {
        TrpError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
