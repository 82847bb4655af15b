use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{PredictionGrid, PresenceGrid};
use crate::proximity::distance_transform;

use super::pwcd::{d_pwcd, fp_pwcd, PwcdConfig};
use super::ranking::{auc, map_pa, map_plain};

pub const MACRO_MEAN_ID: &str = "MACRO_MEAN";

/// All metrics for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub species_id: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub d_pwcd: f64,
    pub fp_pwcd: f64,
    pub map_pa: f64,
    pub map_plain: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSpecies {
    pub species_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchReport {
    pub reports: Vec<MetricReport>,
    pub skipped: Vec<SkippedSpecies>,
}

pub fn evaluate(species_id: &str, pred: &PredictionGrid, truth: &PresenceGrid, cfg: &PwcdConfig) -> Result<MetricReport> {
    let prox = distance_transform(truth)?;
    Ok(MetricReport {
        species_id: species_id.to_string(),
        n_pos: truth.n_positive(),
        n_neg: truth.n_negative(),
        d_pwcd: d_pwcd(pred, truth, &prox, cfg)?,
        fp_pwcd: fp_pwcd(pred, truth, &prox, cfg)?,
        map_pa: map_pa(pred, truth, &prox, cfg)?,
        map_plain: map_plain(pred, truth)?,
        auc: auc(pred, truth)?,
    })
}

/// Scores species in parallel, preserving input order.
///
/// Species whose truth grid is all absence or all presence cannot be scored
/// and are reported in [`BatchReport::skipped`]. Grid mismatches are errors.
pub fn evaluate_batch(items: &[(String, PredictionGrid, PresenceGrid)], cfg: &PwcdConfig) -> Result<BatchReport> {
    cfg.validate()?;
    let results: Vec<Result<Option<MetricReport>>> = items
        .par_iter()
        .map(|(id, pred, truth)| {
            truth.spec().check_same(pred.spec(), &format!("species `{id}`"))?;
            match (truth.n_positive(), truth.n_negative()) {
                (0, _) | (_, 0) => Ok(None),
                _ => evaluate(id, pred, truth, cfg).map(Some),
            }
        })
        .collect();
    let mut batch = BatchReport::default();
    for ((id, _, truth), res) in items.iter().zip(results) {
        match res? {
            Some(r) => batch.reports.push(r),
            None => {
                let reason = if truth.n_positive() == 0 { "no presence cells" } else { "no absence cells" };
                log::warn!("skipping species `{id}`: {reason}");
                batch.skipped.push(SkippedSpecies { species_id: id.clone(), reason: reason.into() });
            }
        }
    }
    Ok(batch)
}

/// Unweighted mean over species. Counts are summed.
pub fn macro_mean(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::Domain("no species to average".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        species_id: MACRO_MEAN_ID.into(),
        n_pos: reports.iter().map(|r| r.n_pos).sum(),
        n_neg: reports.iter().map(|r| r.n_neg).sum(),
        d_pwcd: mean(|r| r.d_pwcd),
        fp_pwcd: mean(|r| r.fp_pwcd),
        map_pa: mean(|r| r.map_pa),
        map_plain: mean(|r| r.map_plain),
        auc: mean(|r| r.auc),
    })
}

/// One row per species followed by a `MACRO_MEAN` row. Floats use the
/// shortest representation that parses back to the same `f64`.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[MetricReport]) -> Result<()> {
    writeln!(w, "species_id,n_pos,n_neg,d_pwcd,fp_pwcd,map_pa,map_plain,auc")?;
    let mean = macro_mean(reports).ok();
    for r in reports.iter().chain(mean.as_ref()) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.species_id, r.n_pos, r.n_neg, r.d_pwcd, r.fp_pwcd, r.map_pa, r.map_plain, r.auc
        )?;
    }
    w.flush()?;
    Ok(())
}
