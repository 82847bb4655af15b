pub mod alpha_curve;
pub mod eval;
pub mod predict;
pub mod rasterize;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Absolute form of a path, for the resolved configuration.
pub(crate) fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

/// `[section]` TOML text for a resolved configuration.
pub(crate) fn section_toml<T: Serialize>(section: &str, value: &T) -> CliResult<String> {
    let mut table = toml::Table::new();
    let v = toml::Value::try_from(value).map_err(|e| CliError::Internal(e.to_string()))?;
    table.insert(section.to_string(), v);
    toml::to_string(&table).map_err(|e| CliError::Internal(e.to_string()))
}

/// `.rgrd` files in `dir` keyed by file stem, sorted; a single file maps to
/// its own stem.
pub(crate) fn grid_files(path: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let meta = fs::metadata(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if meta.is_file() {
        return Ok(vec![(stem(path), path.to_path_buf())]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "rgrd") {
            out.push((stem(&p), p));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::user(format!("no .rgrd grids in {}", path.display())));
    }
    Ok(out)
}
