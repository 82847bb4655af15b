use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rangekit::grid::{make_grid, rasterize, PresenceGrid};
use rangekit::model::rank_truth;
use rangekit::occurrence::{load_occurrences, OccurrenceRecord, Rank};
use rangekit::raster_io::{write_pgm, write_raster, Raster, RasterData};

use super::{absolute, section_toml};
use crate::config::{required, ConfigFile};
use crate::error::{at_path, CliError, CliResult};
use crate::output::{file_stem_for, OutputDir};

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    /// Cell size in degrees; must divide 180.
    #[arg(long)]
    pub res: Option<f64>,
    /// Occurrence CSV.
    #[arg(long = "in", value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Taxonomic rank for a single union map (class, order, family, genus, species).
    #[arg(long)]
    pub rank: Option<String>,
    /// Rank label to select, e.g. `Anas` with `--rank genus`.
    #[arg(long)]
    pub label: Option<String>,
    /// Also write 8-bit PGM previews.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Section {
    res: Option<f64>,
    #[serde(rename = "in")]
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    rank: Option<String>,
    label: Option<String>,
    pgm: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    res: f64,
    #[serde(rename = "in")]
    input: PathBuf,
    out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    pgm: bool,
}

fn resolve(args: &RasterizeArgs, file: &ConfigFile) -> CliResult<Resolved> {
    let s: Section = file.section("rasterize")?;
    let resolved = Resolved {
        res: required(args.res, s.res, "res")?,
        input: absolute(&required(args.input.clone(), s.input.map(|p| file.resolve(p)), "in")?)?,
        out: absolute(&required(args.out.clone(), s.out.map(|p| file.resolve(p)), "out")?)?,
        rank: args.rank.clone().or(s.rank),
        label: args.label.clone().or(s.label),
        pgm: args.pgm || s.pgm.unwrap_or(false),
    };
    if resolved.rank.is_some() != resolved.label.is_some() {
        return Err(CliError::user("--rank and --label must be given together"));
    }
    Ok(resolved)
}

pub fn run(args: &RasterizeArgs, file: &ConfigFile) -> CliResult<()> {
    let cfg = resolve(args, file)?;
    let spec = make_grid(cfg.res)?;
    let rank = cfg.rank.as_deref().map(str::parse::<Rank>).transpose()?;
    let table = at_path(load_occurrences(&cfg.input), &cfg.input)?;
    for r in table.rejects.iter().take(10) {
        log::warn!("{}: line {}: {}", cfg.input.display(), r.line, r.reason);
    }
    if table.rejects.len() > 10 {
        log::warn!("{} more rejected rows", table.rejects.len() - 10);
    }

    let grids: Vec<(String, PresenceGrid)> = match (rank, cfg.label.as_deref()) {
        (Some(rank), Some(label)) => {
            let grid = rank_truth(&table.records, spec, rank, label);
            if grid.n_positive() == 0 {
                log::warn!("no records with {rank} = `{label}`");
            }
            vec![(format!("{rank}_{label}"), grid)]
        }
        _ => {
            let mut groups: BTreeMap<&str, Vec<OccurrenceRecord>> = BTreeMap::new();
            for rec in &table.records {
                groups.entry(rec.species_id()).or_default().push(rec.clone());
            }
            groups
                .into_par_iter()
                .map(|(id, recs)| (id.to_string(), rasterize(spec, &recs, |_| true).grid))
                .collect()
        }
    };
    if grids.is_empty() {
        return Err(CliError::user(format!("{}: no valid occurrence records", cfg.input.display())));
    }

    let mut out = OutputDir::create(&cfg.out)?;
    out.add_input(&cfg.input);
    for (id, grid) in &grids {
        let stem = file_stem_for(id);
        let raster = Raster { spec, data: RasterData::Binary(grid.values().to_vec()) };
        out.write_with(&format!("{stem}.rgrd"), |w| write_raster(w, &raster))?;
        if cfg.pgm {
            let values: Vec<f64> = grid.values().iter().map(|&v| f64::from(v)).collect();
            out.write_with(&format!("{stem}.pgm"), |w| write_pgm(w, &spec, &values))?;
        }
    }
    log::info!("wrote {} grids to {}", grids.len(), cfg.out.display());
    out.finish("rasterize", &section_toml("rasterize", &cfg)?, None)
}
