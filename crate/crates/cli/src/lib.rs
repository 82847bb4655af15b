//! The `rangekit` command-line tool.
//!
//! ```text
//! rangekit [--threads N] [--config FILE] <command>
//!   rasterize    occurrence CSV → one presence grid per species or rank label
//!   eval         prediction + truth grids → metrics.csv
//!   train        embeddings + truth grids → model.ldsm + metrics.csv
//!   predict      checkpoint + embedding → prediction grid (+ PGM preview)
//!   alpha-curve  analytic PWCD weight curves → alpha_curve.csv
//! ```
//!
//! Exit codes: 0 success, 2 user or configuration error, 3 I/O error,
//! 4 internal error. Every output directory receives a `config.toml` holding
//! the fully resolved configuration and a `manifest.json` whose
//! `config_hash` is the SHA-256 of that file.

pub mod commands;
mod config;
mod error;
mod output;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ConfigFile;
pub use error::{CliError, CliResult};
pub use output::{sha256_hex, RunManifest, CONFIG_FILE, MANIFEST_FILE};

pub const THREADS_ENV: &str = "RANGEKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rangekit", version, about = "Species range maps: rasterize, evaluate, train, predict")]
pub struct Cli {
    /// Worker threads; defaults to $RANGEKIT_THREADS, then the number of logical cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize occurrence records into presence grids.
    Rasterize(commands::rasterize::RasterizeArgs),
    /// Score prediction grids against truth grids.
    Eval(commands::eval::EvalArgs),
    /// Train the range model.
    Train(commands::train::TrainArgs),
    /// Predict range maps from a checkpoint.
    Predict(commands::predict::PredictArgs),
    /// Tabulate the PWCD weight as a function of alpha, distance and likelihood.
    AlphaCurve(commands::alpha_curve::AlphaCurveArgs),
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let result = panic::catch_unwind(AssertUnwindSafe(|| setup_threads(cli.threads).and_then(|()| run(&cli))));
    match result {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal error (panic)");
            4
        }
    }
}

fn setup_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::user(format!("{THREADS_ENV} must be an integer, got `{v}`")))?),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(CliError::user("thread count must be at least 1"));
    }
    // The global pool can only be built once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Rasterize(a) => commands::rasterize::run(a, &file),
        Command::Eval(a) => commands::eval::run(a, &file),
        Command::Train(a) => commands::train::run(a, &file),
        Command::Predict(a) => commands::predict::run(a, &file),
        Command::AlphaCurve(a) => commands::alpha_curve::run(a, &file),
    }
}
