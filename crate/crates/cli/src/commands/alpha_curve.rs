use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use rangekit::metrics::{alpha_curve, write_alpha_curve_csv, CurvePoint};

use super::{absolute, section_toml};
use crate::config::{required, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

pub const DEFAULT_ALPHAS: [f64; 6] = [0.001, 0.01, 0.05, 0.1, 0.5, 1.0];

/// Two sweeps: the weight against distance `0..=d-max` at likelihood 1, and
/// against likelihood `0..=1` at `fixed-distance`.
#[derive(Debug, Args)]
pub struct AlphaCurveArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated temperatures [default: 0.001,0.01,0.05,0.1,0.5,1].
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Largest distance of the distance sweep, in pixels [default: 100].
    #[arg(long)]
    pub d_max: Option<f64>,
    /// Distance step [default: 1].
    #[arg(long)]
    pub d_step: Option<f64>,
    /// Likelihood step of the likelihood sweep [default: 0.01].
    #[arg(long)]
    pub p_step: Option<f64>,
    /// Distance of the likelihood sweep [default: 100].
    #[arg(long)]
    pub fixed_distance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Section {
    out: Option<PathBuf>,
    alphas: Option<Vec<f64>>,
    d_max: Option<f64>,
    d_step: Option<f64>,
    p_step: Option<f64>,
    fixed_distance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    out: PathBuf,
    alphas: Vec<f64>,
    d_max: f64,
    d_step: f64,
    p_step: f64,
    fixed_distance: f64,
}

fn steps(max: f64, step: f64, what: &str) -> CliResult<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && max.is_finite() && max >= 0.0) {
        return Err(CliError::user(format!("{what}: step must be positive and the range finite")));
    }
    let n = (max / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if (v[n] - max).abs() > 1e-9 * max.max(1.0) {
        v.push(max);
    } else {
        v[n] = max;
    }
    Ok(v)
}

pub fn curve_points(alphas: &[f64], d_max: f64, d_step: f64, p_step: f64, fixed_distance: f64) -> CliResult<Vec<CurvePoint>> {
    if alphas.is_empty() {
        return Err(CliError::user("at least one alpha is required"));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(CliError::user(format!("alpha must be positive, got {a}")));
    }
    if p_step > 1.0 {
        return Err(CliError::user("p-step must not exceed 1"));
    }
    let mut points = alpha_curve(alphas, &steps(d_max, d_step, "distance sweep")?, 1.0)?;
    for p in steps(1.0, p_step, "likelihood sweep")? {
        points.extend(alpha_curve(alphas, &[fixed_distance], p)?);
    }
    points.sort_by(|a, b| {
        a.alpha.total_cmp(&b.alpha).then(a.distance.total_cmp(&b.distance)).then(a.p.total_cmp(&b.p))
    });
    points.dedup_by(|a, b| a.alpha == b.alpha && a.distance == b.distance && a.p == b.p);
    Ok(points)
}

pub fn run(args: &AlphaCurveArgs, file: &ConfigFile) -> CliResult<()> {
    let s: Section = file.section("alpha_curve")?;
    let cfg = Resolved {
        out: absolute(&required(args.out.clone(), s.out.map(|p| file.resolve(p)), "out")?)?,
        alphas: args.alphas.clone().or(s.alphas).unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
        d_max: args.d_max.or(s.d_max).unwrap_or(100.0),
        d_step: args.d_step.or(s.d_step).unwrap_or(1.0),
        p_step: args.p_step.or(s.p_step).unwrap_or(0.01),
        fixed_distance: args.fixed_distance.or(s.fixed_distance).unwrap_or(100.0),
    };
    let points = curve_points(&cfg.alphas, cfg.d_max, cfg.d_step, cfg.p_step, cfg.fixed_distance)?;
    let mut out = OutputDir::create(&cfg.out)?;
    out.write_with("alpha_curve.csv", |w| write_alpha_curve_csv(w, &points))?;
    out.finish("alpha_curve", &section_toml("alpha_curve", &cfg)?, None)
}
