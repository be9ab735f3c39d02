use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("class {class} has {count} samples, need at least 2")]
    MissingClass { class: usize, count: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("training diverged at epoch {epoch}, batch {batch} (non-finite loss)")]
    Divergence { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
}
