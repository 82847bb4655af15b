//! Mini-batch SGD over species queries.
//!
//! An epoch shuffles the training keys and walks them in batches of
//! `batch_species`. For each species in a batch the loss is taken over its
//! sampled locations (all positives plus sampled negatives, or the whole grid)
//! and, for losses that need them, pseudo-negatives. Batch gradients are the
//! mean over species, accumulated in parallel and reduced in batch order.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, epoch, step, slot)`, so a run resumed from a checkpoint replays
//! the uninterrupted run exactly.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::embedding::EmbeddingTable;
use super::scorer::{accumulate_gradient, logits_at, sigmoid, Head, ModelParams};
use crate::encoders::LocationFeatures;
use crate::error::{Error, Result};
use crate::grid::PresenceGrid;
use crate::losses::{LossConfig, LossSample, PseudoNegativeSampler};

/// Training metrics for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean species loss over the epoch.
    pub loss: f64,
    pub steps: usize,
}

pub fn write_metrics_csv<W: Write>(mut w: W, metrics: &[EpochMetrics]) -> Result<()> {
    writeln!(w, "epoch,loss,steps")?;
    for m in metrics {
        writeln!(w, "{},{},{}", m.epoch, m.loss, m.steps)?;
    }
    w.flush()?;
    Ok(())
}

/// Training inputs: embeddings for at least every truth key, truth grids and
/// the location features they share.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub truths: &'a BTreeMap<String, PresenceGrid>,
    pub feats: &'a LocationFeatures,
}

impl TrainData<'_> {
    fn validate(&self, params: &ModelParams) -> Result<()> {
        let missing: Vec<&str> =
            self.truths.keys().map(String::as_str).filter(|k| self.embeddings.get(k).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Input(format!("no embedding for keys: {}", missing.join(", "))));
        }
        if self.truths.is_empty() {
            return Err(Error::Input("no training species".into()));
        }
        for (key, truth) in self.truths {
            truth.spec().check_same(self.feats.spec(), &format!("truth `{key}` vs features"))?;
        }
        if self.embeddings.dim() != params.embedding_dim() {
            return Err(Error::Input(format!(
                "embeddings have dimension {}, model expects {}",
                self.embeddings.dim(),
                params.embedding_dim()
            )));
        }
        if self.feats.dim() != params.feature_dim() {
            return Err(Error::Input(format!(
                "location features have dimension {}, model expects {}",
                self.feats.dim(),
                params.feature_dim()
            )));
        }
        Ok(())
    }
}

/// Optimiser state: parameters, momentum buffer and history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub params: ModelParams,
    pub velocity: ModelParams,
    pub epochs_done: usize,
    pub metrics: Vec<EpochMetrics>,
}

/// Per-species data reused across steps.
struct Prepared<'a> {
    key: &'a str,
    emb: &'a [f64],
    truth: &'a PresenceGrid,
    positives: Vec<usize>,
    sampler: Option<PseudoNegativeSampler>,
}

impl Trainer {
    pub fn new(params: ModelParams) -> Self {
        let velocity = params.zeros_like();
        Self { params, velocity, epochs_done: 0, metrics: Vec::new() }
    }

    /// Trains until `cfg.epochs` epochs have been completed in total.
    pub fn run(&mut self, data: &TrainData, cfg: &TrainConfig, loss_cfg: &LossConfig) -> Result<()> {
        self.run_until(data, cfg, loss_cfg, cfg.epochs)
    }

    pub fn run_until(&mut self, data: &TrainData, cfg: &TrainConfig, loss_cfg: &LossConfig, target: usize) -> Result<()> {
        cfg.validate()?;
        loss_cfg.validate()?;
        data.validate(&self.params)?;
        let species: Vec<Prepared> = data
            .truths
            .iter()
            .map(|(key, truth)| {
                let sampler = match cfg.loss.uses_pseudo_negatives() {
                    true => Some(PseudoNegativeSampler::new(truth, loss_cfg.buffer_cells)?),
                    false => None,
                };
                Ok(Prepared {
                    key,
                    emb: data.embeddings.get(key).expect("validated").vector(),
                    truth,
                    positives: (0..truth.values().len()).filter(|&i| truth.is_present(i)).collect(),
                    sampler,
                })
            })
            .collect::<Result<_>>()?;

        while self.epochs_done < target {
            let epoch = self.epochs_done;
            let mut order: Vec<usize> = (0..species.len()).collect();
            order.shuffle(&mut stream(cfg.seed, epoch as u64, u64::MAX, 0));
            let mut total = 0.0;
            let mut steps = 0;
            for (step, batch) in order.chunks(cfg.batch_species).enumerate() {
                let results: Vec<(f64, ModelParams)> = batch
                    .par_iter()
                    .enumerate()
                    .map(|(slot, &k)| {
                        let mut rng = stream(cfg.seed, epoch as u64, step as u64, slot as u64);
                        species_step(&self.params, &species[k], data.feats, cfg, loss_cfg, &mut rng)
                    })
                    .collect::<Result<_>>()?;
                let scale = 1.0 / batch.len() as f64;
                let mut grad = self.params.zeros_like();
                for (loss, g) in &results {
                    total += loss;
                    grad.add_scaled(g, scale);
                }
                if cfg.lr > 0.0 {
                    let mut v = self.velocity.clone();
                    for (vt, gt) in v.tensors_mut().into_iter().zip(grad.tensors()) {
                        vt.iter_mut().zip(gt).for_each(|(x, g)| *x = cfg.momentum * *x + g);
                    }
                    self.params.add_scaled(&v, -cfg.lr);
                    self.velocity = v;
                }
                steps += 1;
            }
            if !self.params.is_finite() {
                return Err(Error::Numerical(format!("parameters diverged in epoch {}", epoch + 1)));
            }
            let loss = total / species.len() as f64;
            log::debug!("epoch {}: loss {loss}", epoch + 1);
            self.metrics.push(EpochMetrics { epoch: epoch + 1, loss, steps });
            self.epochs_done += 1;
        }
        Ok(())
    }
}

/// Trains `params` for `cfg.epochs` epochs from scratch.
pub fn train(params: ModelParams, data: &TrainData, cfg: &TrainConfig, loss_cfg: &LossConfig) -> Result<Trainer> {
    let mut trainer = Trainer::new(params);
    trainer.run(data, cfg, loss_cfg)?;
    Ok(trainer)
}

fn stream(seed: u64, epoch: u64, step: u64, slot: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, v) in key.chunks_mut(8).zip([seed, epoch, step, slot]) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Cells and labels a species contributes to one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSample {
    pub cells: Vec<usize>,
    pub labels: Vec<bool>,
    pub pseudo_cells: Vec<usize>,
}

fn draw_sample<R: Rng + ?Sized>(sp: &Prepared, cfg: &TrainConfig, loss_cfg: &LossConfig, rng: &mut R) -> Result<StepSample> {
    let n = sp.truth.values().len();
    let (cells, labels) = if cfg.full_grid {
        ((0..n).collect(), (0..n).map(|i| sp.truth.is_present(i)).collect())
    } else {
        let n_neg = n - sp.positives.len();
        let mut cells = sp.positives.clone();
        if n_neg <= cfg.negatives_per_step {
            cells.extend((0..n).filter(|&i| !sp.truth.is_present(i)));
        } else {
            for _ in 0..cfg.negatives_per_step {
                let cell = loop {
                    let c = rng.random_range(0..n);
                    if !sp.truth.is_present(c) {
                        break c;
                    }
                };
                cells.push(cell);
            }
        }
        let labels = cells.iter().map(|&c| sp.truth.is_present(c)).collect();
        (cells, labels)
    };
    let pseudo_cells = match &sp.sampler {
        Some(s) => {
            let spec = sp.truth.spec();
            s.sample(loss_cfg.n_pseudo, rng)?.into_iter().map(|(r, c)| spec.index(r, c)).collect()
        }
        None => Vec::new(),
    };
    Ok(StepSample { cells, labels, pseudo_cells })
}

fn species_step<R: Rng + ?Sized>(
    params: &ModelParams,
    sp: &Prepared,
    feats: &LocationFeatures,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    rng: &mut R,
) -> Result<(f64, ModelParams)> {
    let sample = draw_sample(sp, cfg, loss_cfg, rng)?;
    species_loss(params, sp.emb, feats, &sample, cfg, loss_cfg)
        .map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("species `{}`: {msg}", sp.key)),
            other => other,
        })
}

/// Loss of one species on a fixed sample and its gradient with respect to
/// every parameter.
pub fn species_loss(
    params: &ModelParams,
    emb: &[f64],
    feats: &LocationFeatures,
    sample: &StepSample,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<(f64, ModelParams)> {
    let head = Head::new(params, emb);
    let all_cells: Vec<usize> = sample.cells.iter().chain(&sample.pseudo_cells).copied().collect();
    let probs: Vec<f64> = logits_at(params, &head, feats, &all_cells).into_iter().map(sigmoid).collect();
    let (p, pseudo) = probs.split_at(sample.cells.len());
    let loss_sample = LossSample::new(p.to_vec(), sample.labels.clone(), pseudo.to_vec())?;
    let out = cfg.loss.evaluate(&loss_sample, loss_cfg)?;
    let dz: Vec<f64> = out
        .grad
        .iter()
        .chain(&out.pseudo_grad)
        .zip(&probs)
        .map(|(g, p)| g * p * (1.0 - p))
        .collect();
    let mut grad = params.zeros_like();
    accumulate_gradient(params, &head, emb, feats, &all_cells, &dz, &mut grad);
    Ok((out.loss, grad))
}
