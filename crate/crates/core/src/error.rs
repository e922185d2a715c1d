use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two parameter sets (or a parameter set and an architecture) disagree in structure.
    #[error("congruence error: {0}")]
    Congruence(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A batch too small (or empty) for the requested loss or metric.
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Correlation of a constant vector.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {value}")]
    NonFiniteLoss { epoch: usize, step: usize, value: f64 },

    #[error("checkpoint parse error at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error("epoch mismatch: train record epoch {train}, test record epoch {test}")]
    EpochMismatch { train: usize, test: usize },

    #[error("landscape grid mismatch: {0}")]
    GridMismatch(String),
}
