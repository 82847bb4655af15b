//! The optional `--config` file.
//!
//! One TOML file may hold a section per command (`[rasterize]`, `[eval]`,
//! `[predict]`, `[alpha_curve]`) with the same keys as the command's long
//! flags. Training reads `[train]`, `[loss]`, `[model]` and `[features]`;
//! its path flags (`embeddings`, `truth`, `out`, `resume`) live in `[train]`.
//! Flags override the file. Relative paths in the file resolve against the
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub path: Option<PathBuf>,
    pub table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let table: toml::Table =
            text.parse().map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        Ok(Self { path: Some(path.to_path_buf()), table })
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.path.as_deref().map(|p| p.parent().unwrap_or(Path::new(".")))
    }

    /// Resolves a path read from the file.
    pub fn resolve(&self, p: PathBuf) -> PathBuf {
        match self.base_dir() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }

    pub fn section<T: DeserializeOwned + Default>(&self, name: &str) -> CliResult<T> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(value) => value
                .clone()
                .try_into()
                .map_err(|e| CliError::user(format!("config section [{name}]: {e}"))),
        }
    }
}

/// Flag value if given, else the file value, else an error naming the flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> CliResult<T> {
    flag.or(file).ok_or_else(|| CliError::user(format!("missing required option --{name}")))
}
