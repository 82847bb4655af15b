//! The `[train]`, `[loss]`, `[model]` and `[features]` TOML sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scorer::ScorerKind;
use crate::encoders::{load_env_manifest, sincos_features, sph_harm_features, LocationFeatures};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::losses::{LossConfig, LossName};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Species queries per optimisation step.
    pub batch_species: usize,
    pub loss: LossName,
    /// Score every grid cell each step instead of positives plus sampled
    /// negatives.
    pub full_grid: bool,
    pub negatives_per_step: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 100,
            lr: 0.5,
            momentum: 0.9,
            batch_species: 8,
            loss: LossName::Asl,
            full_grid: false,
            negatives_per_step: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_species == 0 {
            return Err(Error::Config("batch_species must be at least 1".into()));
        }
        if !self.full_grid && self.negatives_per_step == 0 {
            return Err(Error::Config("negatives_per_step must be positive unless full_grid is set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub scorer: ScorerKind,
    pub hidden: usize,
    /// Attention window side length; must be odd.
    pub window: usize,
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { scorer: ScorerKind::Bilinear, hidden: 32, window: 1, init_scale: 1.0 }
    }
}

/// Location feature recipe. Enabled blocks are concatenated in the order
/// spherical harmonics, sin-cos, covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub spherical_harmonics: bool,
    pub sh_degree: usize,
    pub sincos: bool,
    /// Covariate manifest; relative paths resolve against the config file.
    pub env_manifest: Option<PathBuf>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { spherical_harmonics: true, sh_degree: 8, sincos: false, env_manifest: None }
    }
}

impl FeatureConfig {
    pub fn build(&self, spec: &GridSpec, base_dir: Option<&Path>) -> Result<LocationFeatures> {
        let mut blocks = Vec::new();
        if self.spherical_harmonics {
            blocks.push(sph_harm_features(spec, self.sh_degree));
        }
        if self.sincos {
            blocks.push(sincos_features(spec));
        }
        if let Some(manifest) = &self.env_manifest {
            let path = match base_dir {
                Some(dir) if manifest.is_relative() => dir.join(manifest),
                _ => manifest.clone(),
            };
            let stack = load_env_manifest(path, spec)?;
            for w in stack.warnings() {
                log::warn!("{w}");
            }
            blocks.push(stack.to_features());
        }
        let mut blocks = blocks.into_iter();
        let first = blocks.next().ok_or_else(|| Error::Config("no location features enabled".into()))?;
        blocks.try_fold(first, |acc, b| acc.concat(&b))
    }
}

/// Everything a training run is configured by.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub model: ModelConfig,
    pub features: FeatureConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.loss.validate()?;
        if self.model.hidden == 0 || self.model.window % 2 == 0 {
            return Err(Error::Config("model.hidden must be positive and model.window odd".into()));
        }
        Ok(())
    }
}
