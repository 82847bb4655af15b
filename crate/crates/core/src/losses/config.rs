use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by the four losses; the TOML `[loss]` section.
///
/// | field | default | used by |
/// |-------|---------|---------|
/// | `pos_weight` | 2048 | AN-full, ME-full |
/// | `gamma_pos` | 0 | ASL, RAL |
/// | `gamma_neg` | 4 | ASL, RAL |
/// | `tau` | 0.05 | ASL, RAL (probability shift) |
/// | `lambda_hill` | 1.5 | RAL |
/// | `alpha_m` | `[1.0]` | RAL positive coefficients, `M = len` |
/// | `beta_n` | `[1.0]` | RAL negative coefficients, `N = len` |
/// | `n_pseudo` | 1024 | AN-full, ME-full: pseudo-negatives per species step |
/// | `buffer_cells` | 1 | pseudo-negative exclusion radius in pixels |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub pos_weight: f64,
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    pub tau: f64,
    pub lambda_hill: f64,
    pub alpha_m: Vec<f64>,
    pub beta_n: Vec<f64>,
    pub n_pseudo: usize,
    pub buffer_cells: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            pos_weight: 2048.0,
            gamma_pos: 0.0,
            gamma_neg: 4.0,
            tau: 0.05,
            lambda_hill: 1.5,
            alpha_m: vec![1.0],
            beta_n: vec![1.0],
            n_pseudo: 1024,
            buffer_cells: 1.0,
        }
    }
}

impl LossConfig {
    pub fn m(&self) -> usize {
        self.alpha_m.len()
    }

    pub fn n(&self) -> usize {
        self.beta_n.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.pos_weight.is_finite() && self.pos_weight > 0.0) {
            return bad(format!("pos_weight must be positive, got {}", self.pos_weight));
        }
        if !(self.gamma_pos >= 0.0 && self.gamma_neg >= 0.0 && self.gamma_pos.is_finite() && self.gamma_neg.is_finite()) {
            return bad("gamma_pos and gamma_neg must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1), got {}", self.tau));
        }
        if !self.lambda_hill.is_finite() {
            return bad("lambda_hill must be finite".into());
        }
        if self.alpha_m.is_empty() || self.beta_n.is_empty() {
            return bad("alpha_m and beta_n need at least one coefficient each".into());
        }
        if self.alpha_m.iter().chain(&self.beta_n).any(|v| !v.is_finite()) {
            return bad("alpha_m and beta_n must be finite".into());
        }
        if !(self.buffer_cells.is_finite() && self.buffer_cells >= 0.0) {
            return bad(format!("buffer_cells must be non-negative, got {}", self.buffer_cells));
        }
        Ok(())
    }
}
