//! Evaluation metrics for predicted range maps.
//!
//! The probability-weighted chamfer distance (PWCD) charges every predicted
//! cell `x` a false-positive weight `1 − exp(−α · p(x) · dist(x))`, where
//! `dist(x)` is the pixel distance to the nearest presence cell. Presence cells
//! have zero distance and so cost nothing; confident predictions far from any
//! presence cost close to one. [`map_pa`] plugs that weight into average
//! precision in place of the unit false-positive count.
//!
//! All accumulation happens in `f64`.

mod curve;
mod pwcd;
mod ranking;
mod regression;
mod report;

pub use curve::{alpha_curve, write_alpha_curve_csv, CurvePoint};
pub use pwcd::{d_pwcd, fp_pwcd, PwcdConfig};
pub use ranking::{auc, average_precision, map_pa, map_plain, ranked_order};
pub use regression::{fit_ridge, mean_ridge_r2, ridge_r2, RidgeFit};
pub use report::{evaluate, evaluate_batch, macro_mean, write_report_csv, BatchReport, MetricReport, SkippedSpecies};
