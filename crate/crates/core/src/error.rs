use nalgebra::DVector;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("point is not an equilibrium (residual {residual:e})")]
    NotEquilibrium { residual: f64 },

    #[error("declared functional dependence is violated (magnitude {magnitude:e})")]
    DependenceViolated { magnitude: f64 },

    #[error("witness Jacobian rank {rank} does not match declared independent count {expected}")]
    InconsistentWitness { rank: usize, expected: usize },

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize, last_state: DVector<f64> },

    #[error("training failed at epoch {epoch}, batch {batch}: loss {loss}")]
    TrainingDiverged { epoch: usize, batch: usize, loss: f64 },

    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    Format {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: needed {needed} bytes, found {found}")]
    Length {
        path: String,
        needed: usize,
        found: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
