pub mod evaluate;
pub mod keyrate;
pub mod plot;
pub mod simulate;
pub mod train;

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::dataset(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::dataset(format!("cannot write {}: {e}", path.display())))
}
