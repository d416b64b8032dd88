use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("non-finite value {stage} layer {layer} ({kind})")]
    Numeric {
        layer: usize,
        kind: &'static str,
        stage: &'static str,
    },

    #[error("invalid hyperparameter: {0}")]
    Config(String),

    #[error(
        "training diverged at epoch {epoch}: mean loss {loss:.6e} exceeds ten times the initial {initial:.6e} \
         for two consecutive epochs (history {history:?})"
    )]
    Diverged {
        epoch: usize,
        loss: f64,
        initial: f64,
        history: Vec<f64>,
    },

    #[error("bad checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
