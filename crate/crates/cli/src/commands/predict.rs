use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use rangekit::model::{load_checkpoint, load_embedding_vector, load_embeddings, predict_range, RunConfig, SpeciesEmbedding};
use rangekit::raster_io::{write_pgm, write_raster, Raster, RasterData};

use super::{absolute, section_toml};
use crate::config::{required, ConfigFile};
use crate::error::{at_path, CliError, CliResult};
use crate::output::{file_stem_for, OutputDir};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Embedding file to look `--key` up in.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Species or rank key to predict; repeatable.
    #[arg(long = "key")]
    pub keys: Vec<String>,
    /// Query vector file for a zero-shot prediction; repeatable.
    #[arg(long = "embedding-file")]
    pub embedding_files: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write 8-bit PGM previews.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Section {
    checkpoint: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    keys: Option<Vec<String>>,
    embedding_files: Option<Vec<PathBuf>>,
    out: Option<PathBuf>,
    pgm: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    checkpoint: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    embeddings: Option<PathBuf>,
    keys: Vec<String>,
    embedding_files: Vec<PathBuf>,
    out: PathBuf,
    pgm: bool,
}

fn resolve(args: &PredictArgs, file: &ConfigFile) -> CliResult<Resolved> {
    let s: Section = file.section("predict")?;
    let keys = if args.keys.is_empty() { s.keys.unwrap_or_default() } else { args.keys.clone() };
    let embedding_files = if args.embedding_files.is_empty() {
        s.embedding_files.unwrap_or_default().into_iter().map(|p| file.resolve(p)).collect()
    } else {
        args.embedding_files.clone()
    };
    let cfg = Resolved {
        checkpoint: absolute(&required(args.checkpoint.clone(), s.checkpoint.map(|p| file.resolve(p)), "checkpoint")?)?,
        embeddings: args.embeddings.clone().or(s.embeddings.map(|p| file.resolve(p))).map(|p| absolute(&p)).transpose()?,
        keys,
        embedding_files: embedding_files.iter().map(|p| absolute(p)).collect::<CliResult<_>>()?,
        out: absolute(&required(args.out.clone(), s.out.map(|p| file.resolve(p)), "out")?)?,
        pgm: args.pgm || s.pgm.unwrap_or(false),
    };
    if cfg.keys.is_empty() && cfg.embedding_files.is_empty() {
        return Err(CliError::user("nothing to predict: give --key or --embedding-file"));
    }
    if !cfg.keys.is_empty() && cfg.embeddings.is_none() {
        return Err(CliError::user("--key needs --embeddings"));
    }
    Ok(cfg)
}

pub fn run(args: &PredictArgs, file: &ConfigFile) -> CliResult<()> {
    let cfg = resolve(args, file)?;
    let ckpt = at_path(load_checkpoint(&cfg.checkpoint), &cfg.checkpoint)?;
    let run_cfg = RunConfig::from_toml(&ckpt.config_echo).map_err(|e| CliError::user(format!("{}: {e}", cfg.checkpoint.display())))?;
    let feats = run_cfg.features.build(&ckpt.spec, None)?;
    let params = &ckpt.trainer.params;
    if feats.dim() != params.feature_dim() {
        return Err(CliError::user(format!(
            "checkpoint expects {} location features, its feature recipe yields {}",
            params.feature_dim(),
            feats.dim()
        )));
    }

    let mut queries: Vec<SpeciesEmbedding> = Vec::new();
    let mut inputs = vec![cfg.checkpoint.clone()];
    if let Some(path) = &cfg.embeddings {
        let table = at_path(load_embeddings(path), path)?;
        let missing: Vec<&str> = cfg.keys.iter().map(String::as_str).filter(|k| table.get(k).is_none()).collect();
        if !missing.is_empty() {
            return Err(CliError::user(format!("no embedding for keys: {}", missing.join(", "))));
        }
        queries.extend(cfg.keys.iter().map(|k| table.get(k).expect("checked").clone()));
        inputs.push(path.clone());
    }
    for path in &cfg.embedding_files {
        queries.push(at_path(load_embedding_vector(path), path)?);
        inputs.push(path.clone());
    }

    let mut out = OutputDir::create(&cfg.out)?;
    for p in &inputs {
        out.add_input(p);
    }
    for emb in &queries {
        let grid = predict_range(params, emb, &feats)?;
        let stem = file_stem_for(emb.key());
        let data = grid.values().iter().map(|&v| v as f32).collect();
        let raster = Raster { spec: ckpt.spec, data: RasterData::Float(data) };
        out.write_with(&format!("{stem}.rgrd"), |w| write_raster(w, &raster))?;
        if cfg.pgm {
            out.write_with(&format!("{stem}.pgm"), |w| write_pgm(w, &ckpt.spec, grid.values()))?;
        }
    }
    out.finish("predict", &section_toml("predict", &cfg)?, None)
}
