use std::fmt;

use skyphase_core::Error as CoreError;
use skyphase_nn::Error as NnError;

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    DatasetIo = 3,
    Mismatch = 4,
    Domain = 5,
    PlotInput = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Config, message)
    }

    pub fn dataset(message: impl Into<String>) -> Self {
        Self::new(ExitKind::DatasetIo, message)
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Mismatch, message)
    }

    pub fn plot(message: impl Into<String>) -> Self {
        Self::new(ExitKind::PlotInput, message)
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::Config { .. } | CoreError::Stratification { .. } | CoreError::Propagation { .. } => {
                ExitKind::Config
            }
            CoreError::Io { .. }
            | CoreError::Corrupt { .. }
            | CoreError::Format { .. }
            | CoreError::Lookup { .. }
            | CoreError::Manifest { .. } => ExitKind::DatasetIo,
            CoreError::Shape { .. } => ExitKind::Mismatch,
            CoreError::Domain { .. }
            | CoreError::Numerical { .. }
            | CoreError::UndefinedGamma(_)
            | CoreError::Unphysical(_)
            | CoreError::InvalidStats(_) => ExitKind::Domain,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        let kind = match &e {
            NnError::Spec(_) | NnError::Shape { .. } => ExitKind::Mismatch,
            NnError::Config(_) => ExitKind::Config,
            NnError::Checkpoint { .. } | NnError::Io { .. } => ExitKind::DatasetIo,
            NnError::Numeric { .. } | NnError::Diverged { .. } => ExitKind::Domain,
        };
        Self::new(kind, e.to_string())
    }
}
