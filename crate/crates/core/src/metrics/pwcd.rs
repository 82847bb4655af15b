use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PredictionGrid, PresenceGrid};
use crate::proximity::ProximityField;

/// Temperature of the exponential distance weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwcdConfig {
    pub alpha: f64,
}

impl Default for PwcdConfig {
    fn default() -> Self {
        Self { alpha: 0.1 }
    }
}

impl PwcdConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self { alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.alpha > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("alpha must be positive and finite, got {}", self.alpha)))
        }
    }

    /// Proximity-weighted false-positive cost of one cell.
    #[inline]
    pub fn weight(&self, p: f64, distance: f64) -> f64 {
        -(-self.alpha * p * distance).exp_m1()
    }
}

pub(crate) fn check_triplet(pred: &PredictionGrid, truth: &PresenceGrid, prox: &ProximityField) -> Result<()> {
    truth.spec().check_same(pred.spec(), "prediction vs truth")?;
    truth.spec().check_same(prox.spec(), "proximity vs truth")
}

/// Sum of proximity-weighted false-positive costs over every cell.
pub fn fp_pwcd(pred: &PredictionGrid, truth: &PresenceGrid, prox: &ProximityField, cfg: &PwcdConfig) -> Result<f64> {
    check_triplet(pred, truth, prox)?;
    cfg.validate()?;
    Ok(pred
        .values()
        .iter()
        .zip(prox.distances())
        .map(|(&p, &d)| cfg.weight(p, f64::from(d)))
        .sum())
}

/// [`fp_pwcd`] divided by the number of negative cells in `truth`.
pub fn d_pwcd(pred: &PredictionGrid, truth: &PresenceGrid, prox: &ProximityField, cfg: &PwcdConfig) -> Result<f64> {
    let fp = fp_pwcd(pred, truth, prox, cfg)?;
    match truth.n_negative() {
        0 => Err(Error::Domain("no negatives in ground truth".into())),
        n => Ok(fp / n as f64),
    }
}
