use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation.
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    /// An argument lies outside the domain of a formula.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("numerical failure in {op}: {reason}")]
    Numerical { op: &'static str, reason: String },

    #[error(
        "stratification rejected: layer {layer} carries Rytov share {share:.4} (> {cap}); \
         use at least {min_layers} layers"
    )]
    Stratification {
        layer: usize,
        share: f64,
        cap: f64,
        min_layers: usize,
    },

    #[error("propagation error in segment {segment}: {reason}")]
    Propagation { segment: usize, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("coherent efficiency undefined: {0}")]
    UndefinedGamma(String),

    #[error("unphysical Gaussian state: {0}")]
    Unphysical(String),

    #[error("invalid channel statistics: {0}")]
    InvalidStats(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt data in {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("unsupported format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("sample {index} not found (dataset holds {count})")]
    Lookup { index: usize, count: usize },

    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
