//! Command-line orchestration of campaigns, training, evaluation,
//! key-rate scans and plots.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult, ExitKind};
