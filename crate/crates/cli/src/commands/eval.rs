use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use rangekit::metrics::{evaluate_batch, write_report_csv, PwcdConfig};
use rangekit::raster_io::{load_prediction, load_presence};

use super::{absolute, grid_files, section_toml};
use crate::config::{required, ConfigFile};
use crate::error::{at_path, CliError, CliResult};
use crate::output::OutputDir;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction grid, or a directory of them named like the truth grids.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Truth grid, or a directory of them.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PWCD temperature [default: 0.1].
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Section {
    pred: Option<PathBuf>,
    truth: Option<PathBuf>,
    out: Option<PathBuf>,
    alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    pred: PathBuf,
    truth: PathBuf,
    out: PathBuf,
    alpha: f64,
}

pub fn run(args: &EvalArgs, file: &ConfigFile) -> CliResult<()> {
    let s: Section = file.section("eval")?;
    let cfg = Resolved {
        pred: absolute(&required(args.pred.clone(), s.pred.map(|p| file.resolve(p)), "pred")?)?,
        truth: absolute(&required(args.truth.clone(), s.truth.map(|p| file.resolve(p)), "truth")?)?,
        out: absolute(&required(args.out.clone(), s.out.map(|p| file.resolve(p)), "out")?)?,
        alpha: args.alpha.or(s.alpha).unwrap_or(PwcdConfig::default().alpha),
    };
    let pwcd = PwcdConfig::new(cfg.alpha)?;

    let truths = grid_files(&cfg.truth)?;
    let single_pred = cfg.pred.is_file();
    if single_pred && truths.len() > 1 {
        return Err(CliError::user("--pred is a single file but --truth holds several grids"));
    }
    let mut items = Vec::with_capacity(truths.len());
    let mut inputs = Vec::new();
    for (id, truth_path) in truths {
        let pred_path = if single_pred { cfg.pred.clone() } else { cfg.pred.join(format!("{id}.rgrd")) };
        if !pred_path.is_file() {
            return Err(CliError::user(format!("no prediction for `{id}` (expected {})", pred_path.display())));
        }
        let truth = at_path(load_presence(&truth_path), &truth_path)?;
        let pred = at_path(load_prediction(&pred_path), &pred_path)?;
        if truth.spec() != pred.spec() {
            return Err(CliError::user(format!(
                "grid mismatch for `{id}`: prediction {} is {}x{}, truth {} is {}x{}",
                pred_path.display(),
                pred.spec().rows(),
                pred.spec().cols(),
                truth_path.display(),
                truth.spec().rows(),
                truth.spec().cols()
            )));
        }
        inputs.push(pred_path);
        inputs.push(truth_path);
        items.push((id, pred, truth));
    }
    let batch = evaluate_batch(&items, &pwcd)?;
    for s in &batch.skipped {
        eprintln!("warning: skipped `{}`: {}", s.species_id, s.reason);
    }

    let mut out = OutputDir::create(&cfg.out)?;
    for p in &inputs {
        out.add_input(p);
    }
    out.write_with("metrics.csv", |w| write_report_csv(w, &batch.reports))?;
    out.finish("eval", &section_toml("eval", &cfg)?, None)
}
