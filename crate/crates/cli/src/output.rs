//! Output directories and run manifests.
//!
//! Every command writes into a single `--out` directory through an
//! [`OutputDir`]. Files are registered as they are created; if the command
//! fails before [`OutputDir::finish`], they are deleted again, so a failed
//! run leaves nothing behind but the directories it had to create.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct OutputDir {
    root: PathBuf,
    created: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    started_unix: u64,
    finished: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), created: Vec::new(), inputs: Vec::new(), started_unix: unix_now(), finished: false })
    }

    /// Registers `name` as an output and returns its path. Names may not
    /// leave the directory.
    pub fn path(&mut self, name: &str) -> CliResult<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::Internal(format!("invalid output file name `{name}`")));
        }
        let p = self.root.join(name);
        if self.created.contains(&p) {
            return Err(CliError::user(format!("two outputs map to the same file `{name}`")));
        }
        self.created.push(p.clone());
        Ok(p)
    }

    /// Runs `write` against a buffered writer for a new output file.
    pub fn write_with(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> rangekit::Result<()>) -> CliResult<PathBuf> {
        let p = self.path(name)?;
        let file = File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let mut w = BufWriter::new(file);
        crate::error::at_path(write(&mut w), &p)?;
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    pub fn add_input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Writes `config.toml` and `manifest.json`, then keeps all outputs.
    pub fn finish(mut self, command: &str, config: &str, seed: Option<u64>) -> CliResult<()> {
        let config_path = self.path(CONFIG_FILE)?;
        fs::write(&config_path, config).map_err(|e| CliError::Io(format!("{}: {e}", config_path.display())))?;
        let record = |p: &PathBuf| -> CliResult<FileRecord> {
            Ok(FileRecord { path: p.display().to_string(), sha256: file_sha256(p)? })
        };
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config.as_bytes()),
            config: config.to_string(),
            seed,
            threads: rayon::current_num_threads(),
            inputs: self.inputs.iter().map(record).collect::<CliResult<_>>()?,
            outputs: self.created.iter().map(record).collect::<CliResult<_>>()?,
            started_unix: self.started_unix,
            finished_unix: unix_now(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        let manifest_path = self.path(MANIFEST_FILE)?;
        fs::write(&manifest_path, json + "\n").map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.finished {
            for p in &self.created {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Maps an identifier to a portable file stem.
pub fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}
