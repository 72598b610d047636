use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("line {line} has zero impedance (r = x = 0)")]
    ZeroImpedanceBranch { line: usize },

    #[error("power flow diverged after {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("eliminated block is singular; cannot Kron-reduce")]
    SingularBlock,

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainDiverged { epoch: usize },

    #[error("operating-point sampling failed after {attempts} attempts (power flow kept diverging)")]
    SamplingExhausted { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
