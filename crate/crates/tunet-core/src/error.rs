//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by tensor ops, layers, the model, training, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("series `{series_id}`: {reason}")]
    SeriesFormat { series_id: String, reason: String },

    #[error("series `{series_id}`: label {label} out of range (max {max})")]
    LabelOutOfRange {
        series_id: String,
        label: usize,
        max: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint version mismatch: {0}")]
    CheckpointVersion(String),

    #[error("checkpoint checksum mismatch (expected {expected:#010x}, got {got:#010x})")]
    ChecksumMismatch { expected: u32, got: u32 },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Divergence {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("gradient check failed: {0}")]
    GradcheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config errors, data errors, divergence,
    /// and gradcheck failures each get a distinct code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::CheckpointVersion(_) => 2,
            Error::ShapeMismatch(_)
            | Error::Manifest(_)
            | Error::SeriesFormat { .. }
            | Error::LabelOutOfRange { .. }
            | Error::Checkpoint(_)
            | Error::ChecksumMismatch { .. }
            | Error::Io(_) => 3,
            Error::Divergence { .. } | Error::NonFiniteGradient(_) => 4,
            Error::GradcheckFailed(_) => 5,
        }
    }
}
