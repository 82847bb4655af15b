use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use rangekit::grid::PresenceGrid;
use rangekit::losses::LossName;
use rangekit::model::{
    load_checkpoint, load_embeddings, write_checkpoint, write_metrics_csv, Checkpoint, ModelParams, RunConfig, TrainData,
    Trainer,
};
use rangekit::raster_io::load_presence;

use super::{absolute, grid_files};
use crate::config::{required, ConfigFile};
use crate::error::{at_path, CliError, CliResult};
use crate::output::OutputDir;

pub const CHECKPOINT_FILE: &str = "model.ldsm";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Embedding file (binary SEMB or CSV) with a vector for every truth key.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Directory of truth grids; file stems are the species keys.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// an_full, me_full, asl or ral.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Continue from a checkpoint written with the same configuration.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Path keys accepted in the `[train]` section next to the optimiser settings.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct Paths {
    embeddings: Option<PathBuf>,
    truth: Option<PathBuf>,
    out: Option<PathBuf>,
    resume: Option<PathBuf>,
}

const PATH_KEYS: [&str; 4] = ["embeddings", "truth", "out", "resume"];

struct Resolved {
    run: RunConfig,
    embeddings: PathBuf,
    truth: PathBuf,
    out: PathBuf,
    resume: Option<PathBuf>,
}

impl Resolved {
    fn to_toml(&self) -> CliResult<String> {
        let mut table: toml::Table =
            toml::Value::try_from(&self.run).map_err(|e| CliError::Internal(e.to_string()))?.try_into().map_err(|e: toml::de::Error| CliError::Internal(e.to_string()))?;
        let train = table.get_mut("train").and_then(|v| v.as_table_mut()).ok_or_else(|| CliError::Internal("no [train]".into()))?;
        let mut put = |k: &str, p: &PathBuf| train.insert(k.into(), toml::Value::String(p.display().to_string()));
        put("embeddings", &self.embeddings);
        put("truth", &self.truth);
        put("out", &self.out);
        if let Some(r) = &self.resume {
            put("resume", r);
        }
        toml::to_string(&table).map_err(|e| CliError::Internal(e.to_string()))
    }
}

fn resolve(args: &TrainArgs, file: &ConfigFile) -> CliResult<Resolved> {
    let mut table = toml::Table::new();
    for key in ["train", "loss", "model", "features"] {
        if let Some(v) = file.table.get(key) {
            table.insert(key.into(), v.clone());
        }
    }
    let mut paths = Paths::default();
    if let Some(train) = table.get_mut("train").and_then(|v| v.as_table_mut()) {
        let mut extracted = toml::Table::new();
        for key in PATH_KEYS {
            if let Some(v) = train.remove(key) {
                extracted.insert(key.into(), v);
            }
        }
        paths = toml::Value::Table(extracted).try_into().map_err(|e| CliError::user(format!("config section [train]: {e}")))?;
    }
    let mut run: RunConfig =
        toml::Value::Table(table).try_into().map_err(|e| CliError::user(format!("config: {e}")))?;

    if let Some(loss) = &args.loss {
        run.train.loss = loss.parse::<LossName>()?;
    }
    if let Some(e) = args.epochs {
        run.train.epochs = e;
    }
    if let Some(s) = args.seed {
        run.train.seed = s;
    }
    if let Some(lr) = args.lr {
        run.train.lr = lr;
    }
    if let Some(m) = run.features.env_manifest.take() {
        run.features.env_manifest = Some(absolute(&file.resolve(m))?);
    }
    run.validate()?;
    let resolve_path = |flag: &Option<PathBuf>, from_file: Option<PathBuf>, name: &str| -> CliResult<PathBuf> {
        absolute(&required(flag.clone(), from_file.map(|p| file.resolve(p)), name)?)
    };
    Ok(Resolved {
        embeddings: resolve_path(&args.embeddings, paths.embeddings, "embeddings")?,
        truth: resolve_path(&args.truth, paths.truth, "truth")?,
        out: resolve_path(&args.out, paths.out, "out")?,
        resume: args.resume.clone().or(paths.resume.map(|p| file.resolve(p))).map(|p| absolute(&p)).transpose()?,
        run,
    })
}

/// Everything but the epoch budget must match for a resume.
fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    let mut a = a.clone();
    a.train.epochs = b.train.epochs;
    &a == b
}

pub fn run(args: &TrainArgs, file: &ConfigFile) -> CliResult<()> {
    let cfg = resolve(args, file)?;
    let embeddings = at_path(load_embeddings(&cfg.embeddings), &cfg.embeddings)?;
    let mut truths: BTreeMap<String, PresenceGrid> = BTreeMap::new();
    let mut inputs = vec![cfg.embeddings.clone()];
    for (key, path) in grid_files(&cfg.truth)? {
        truths.insert(key, at_path(load_presence(&path), &path)?);
        inputs.push(path);
    }
    let missing: Vec<&str> = truths.keys().map(String::as_str).filter(|k| embeddings.get(k).is_none()).collect();
    if !missing.is_empty() {
        return Err(CliError::user(format!("no embedding for keys: {}", missing.join(", "))));
    }
    let spec = *truths.values().next().expect("grid_files is non-empty").spec();
    if let Some((key, _)) = truths.iter().find(|(_, t)| *t.spec() != spec) {
        return Err(CliError::user(format!("truth grid `{key}` differs in shape from the others")));
    }
    let feats = cfg.run.features.build(&spec, None)?;

    let mut trainer = match &cfg.resume {
        Some(path) => {
            let ckpt = at_path(load_checkpoint(path), path)?;
            let previous = RunConfig::from_toml(&ckpt.config_echo).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
            if !same_run(&previous, &cfg.run) || ckpt.spec != spec {
                return Err(CliError::user(format!("{}: checkpoint was trained with a different configuration", path.display())));
            }
            if ckpt.trainer.epochs_done > cfg.run.train.epochs {
                return Err(CliError::user(format!(
                    "checkpoint has {} epochs, more than the requested {}",
                    ckpt.trainer.epochs_done, cfg.run.train.epochs
                )));
            }
            inputs.push(path.clone());
            ckpt.trainer
        }
        None => {
            let m = &cfg.run.model;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.train.seed);
            let params = ModelParams::init(m.scorer, embeddings.dim(), feats.dim(), m.hidden, m.window, m.init_scale, &mut rng)?;
            Trainer::new(params)
        }
    };
    let data = TrainData { embeddings: &embeddings, truths: &truths, feats: &feats };
    trainer.run(&data, &cfg.run.train, &cfg.run.loss)?;
    if let Some(last) = trainer.metrics.last() {
        log::info!("epoch {}: loss {}", last.epoch, last.loss);
    }

    let mut out = OutputDir::create(&cfg.out)?;
    for p in &inputs {
        out.add_input(p);
    }
    let ckpt = Checkpoint { config_echo: cfg.run.to_toml(), spec, trainer };
    out.write_with(CHECKPOINT_FILE, |w| write_checkpoint(w, &ckpt))?;
    out.write_with(METRICS_FILE, |w| write_metrics_csv(w, &ckpt.trainer.metrics))?;
    out.finish("train", &cfg.to_toml()?, Some(cfg.run.train.seed))
}
