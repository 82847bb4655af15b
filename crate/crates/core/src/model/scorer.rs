//! Scorers mapping a species embedding and per-cell features to a presence
//! probability, with their parameter gradients.
//!
//! Bilinear: `p(x) = σ(⟨W_sᵀ e, W_lᵀ f_x⟩ + b)`.
//!
//! Cross-attention: one query `q = W_qᵀ e` attends over the location tokens
//! in a square window around each cell (clipped at the grid edge, no
//! wrap-around), with keys `k_n = W_kᵀ f_n` and values `v_n = W_vᵀ f_n`:
//!
//! ```text
//! a_n  = softmax_n(q·k_n / √h)
//! o    = Σ_n a_n v_n
//! p(x) = σ(⟨w_out, q ⊙ o⟩ + b)
//! ```
//!
//! The query also gates the attended value, so a window of one reduces to a
//! bilinear scorer with the extra projection `diag(w_out)`.
//!
//! Both scorers factor through per-species vectors in feature space, so a
//! logit costs `O(f)` per token rather than `O(f·h)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embedding::SpeciesEmbedding;
use crate::encoders::LocationFeatures;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PredictionGrid};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.cols).map(|row| dot(row, x)).collect()
    }

    /// `Mᵀ x`.
    pub fn t_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks(self.cols).zip(x) {
            out.iter_mut().zip(row).for_each(|(o, m)| *o += xi * m);
        }
        out
    }

    /// `M += a bᵀ`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (row, &ai) in self.data.chunks_mut(self.cols).zip(a) {
            row.iter_mut().zip(b).for_each(|(m, bj)| *m += ai * bj);
        }
    }

    fn random<R: Rng + ?Sized>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, sd).expect("finite sd");
        Self { rows, cols, data: (0..rows * cols).map(|_| normal.sample(rng)).collect() }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Bilinear,
    CrossAttention,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Bilinear => "bilinear",
            ScorerKind::CrossAttention => "cross_attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// `d × h`
    pub w_q: Matrix,
    /// `f × h`
    pub w_k: Matrix,
    /// `f × h`
    pub w_v: Matrix,
    pub w_out: Vec<f64>,
    /// Odd side length of the square neighbourhood.
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Bilinear {
        /// `d × h`
        w_species: Matrix,
        /// `f × h`
        w_location: Matrix,
    },
    CrossAttention(Attention),
}

/// Trainable parameters: the scorer weights plus an output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub scorer: Scorer,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(kind: ScorerKind, d: usize, f: usize, h: usize, window: usize) -> Result<Self> {
        check_dims(d, f, h, window)?;
        let scorer = match kind {
            ScorerKind::Bilinear => Scorer::Bilinear { w_species: Matrix::zeros(d, h), w_location: Matrix::zeros(f, h) },
            ScorerKind::CrossAttention => Scorer::CrossAttention(Attention {
                w_q: Matrix::zeros(d, h),
                w_k: Matrix::zeros(f, h),
                w_v: Matrix::zeros(f, h),
                w_out: vec![0.0; h],
                window,
            }),
        };
        Ok(Self { scorer, bias: 0.0 })
    }

    /// Gaussian initialisation with standard deviation `scale / √fan_in`;
    /// `w_out` starts at ones and the bias at zero.
    pub fn init<R: Rng + ?Sized>(
        kind: ScorerKind,
        d: usize,
        f: usize,
        h: usize,
        window: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(d, f, h, window)?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::Config(format!("init_scale must be non-negative, got {scale}")));
        }
        let sd = |fan_in: usize| scale / (fan_in as f64).sqrt();
        let scorer = match kind {
            ScorerKind::Bilinear => Scorer::Bilinear {
                w_species: Matrix::random(d, h, sd(d), rng),
                w_location: Matrix::random(f, h, sd(f), rng),
            },
            ScorerKind::CrossAttention => Scorer::CrossAttention(Attention {
                w_q: Matrix::random(d, h, sd(d), rng),
                w_k: Matrix::random(f, h, sd(f), rng),
                w_v: Matrix::random(f, h, sd(f), rng),
                w_out: vec![1.0; h],
                window,
            }),
        };
        Ok(Self { scorer, bias: 0.0 })
    }

    pub fn kind(&self) -> ScorerKind {
        match self.scorer {
            Scorer::Bilinear { .. } => ScorerKind::Bilinear,
            Scorer::CrossAttention(_) => ScorerKind::CrossAttention,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match &self.scorer {
            Scorer::Bilinear { w_species, .. } => w_species.rows,
            Scorer::CrossAttention(a) => a.w_q.rows,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match &self.scorer {
            Scorer::Bilinear { w_location, .. } => w_location.rows,
            Scorer::CrossAttention(a) => a.w_k.rows,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match &self.scorer {
            Scorer::Bilinear { w_species, .. } => w_species.cols,
            Scorer::CrossAttention(a) => a.w_q.cols,
        }
    }

    /// Window side length; 1 for the bilinear scorer.
    pub fn window(&self) -> usize {
        match &self.scorer {
            Scorer::Bilinear { .. } => 1,
            Scorer::CrossAttention(a) => a.window,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.kind(), self.embedding_dim(), self.feature_dim(), self.hidden_dim(), self.window())
            .expect("shapes already validated")
    }

    /// Parameter blocks in a fixed order; the bias comes last.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = match &self.scorer {
            Scorer::Bilinear { w_species, w_location } => vec![&w_species.data, &w_location.data],
            Scorer::CrossAttention(a) => vec![&a.w_q.data, &a.w_k.data, &a.w_v.data, &a.w_out],
        };
        out.push(std::slice::from_ref(&self.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = match &mut self.scorer {
            Scorer::Bilinear { w_species, w_location } => vec![&mut w_species.data, &mut w_location.data],
            Scorer::CrossAttention(a) => vec![&mut a.w_q.data, &mut a.w_k.data, &mut a.w_v.data, &mut a.w_out],
        };
        out.push(std::slice::from_mut(&mut self.bias));
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += s · other`; shapes must match.
    pub fn add_scaled(&mut self, other: &ModelParams, s: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_inputs(&self, emb: &SpeciesEmbedding, feats: &LocationFeatures) -> Result<()> {
        if emb.dim() != self.embedding_dim() {
            return Err(Error::Input(format!(
                "embedding `{}` has dimension {}, model expects {}",
                emb.key(),
                emb.dim(),
                self.embedding_dim()
            )));
        }
        if feats.dim() != self.feature_dim() {
            return Err(Error::Input(format!(
                "location features have dimension {}, model expects {}",
                feats.dim(),
                self.feature_dim()
            )));
        }
        Ok(())
    }
}

fn check_dims(d: usize, f: usize, h: usize, window: usize) -> Result<()> {
    if d == 0 || f == 0 || h == 0 {
        return Err(Error::Config(format!("model dimensions must be positive (d={d}, f={f}, h={h})")));
    }
    if window % 2 == 0 {
        return Err(Error::Config(format!("attention window must be odd, got {window}")));
    }
    Ok(())
}

/// Cells in the clipped square window around `cell`, row-major.
pub fn window_cells(spec: &GridSpec, cell: usize, window: usize) -> impl Iterator<Item = usize> + '_ {
    let k = window / 2;
    let (r, c) = spec.row_col(cell);
    let rows = r.saturating_sub(k)..=(r + k).min(spec.rows() - 1);
    let cols = c.saturating_sub(k)..=(c + k).min(spec.cols() - 1);
    rows.flat_map(move |rr| cols.clone().map(move |cc| spec.index(rr, cc)))
}

/// Per-species quantities shared by every cell.
pub(crate) enum Head {
    /// `u = W_sᵀ e`, `v = W_l u`.
    Bilinear { u: Vec<f64>, v: Vec<f64> },
    /// `q = W_qᵀ e`, `c = w_out ⊙ q`, `κ = W_k q / √h`, `ν = W_v c`.
    Attention { q: Vec<f64>, c: Vec<f64>, kappa: Vec<f64>, nu: Vec<f64>, window: usize },
}

impl Head {
    pub(crate) fn new(params: &ModelParams, emb: &[f64]) -> Self {
        match &params.scorer {
            Scorer::Bilinear { w_species, w_location } => {
                let u = w_species.t_mul_vec(emb);
                let v = w_location.mul_vec(&u);
                Head::Bilinear { u, v }
            }
            Scorer::CrossAttention(a) => {
                let q = a.w_q.t_mul_vec(emb);
                let c: Vec<f64> = a.w_out.iter().zip(&q).map(|(w, qj)| w * qj).collect();
                let scale = (q.len() as f64).sqrt();
                let kappa = a.w_k.mul_vec(&q).into_iter().map(|x| x / scale).collect();
                let nu = a.w_v.mul_vec(&c);
                Head::Attention { q, c, kappa, nu, window: a.window }
            }
        }
    }

    /// Logit at one cell, without the bias.
    pub(crate) fn logit(&self, feats: &LocationFeatures, cell: usize) -> f64 {
        match self {
            Head::Bilinear { v, .. } => dot(feats.row(cell), v),
            Head::Attention { kappa, nu, window, .. } => {
                let tokens: Vec<(f64, f64)> = window_cells(feats.spec(), cell, *window)
                    .map(|n| (dot(feats.row(n), kappa), dot(feats.row(n), nu)))
                    .collect();
                attend(&tokens).0
            }
        }
    }
}

/// Softmax over token scores; returns `Σ a_n val_n` and the weights.
fn attend(tokens: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let max = tokens.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let mut a: Vec<f64> = tokens.iter().map(|t| (t.0 - max).exp()).collect();
    let total: f64 = a.iter().sum();
    a.iter_mut().for_each(|x| *x /= total);
    let out = a.iter().zip(tokens).map(|(w, t)| w * t.1).sum();
    (out, a)
}

/// Logits (bias included) at the requested cells.
pub(crate) fn logits_at(params: &ModelParams, head: &Head, feats: &LocationFeatures, cells: &[usize]) -> Vec<f64> {
    cells.iter().map(|&c| head.logit(feats, c) + params.bias).collect()
}

/// Adds the gradient of `Σ_i dz_i · z(cells_i)` with respect to every
/// parameter into `grad`.
pub(crate) fn accumulate_gradient(
    params: &ModelParams,
    head: &Head,
    emb: &[f64],
    feats: &LocationFeatures,
    cells: &[usize],
    dz: &[f64],
    grad: &mut ModelParams,
) {
    let f = feats.dim();
    grad.bias += dz.iter().sum::<f64>();
    match (head, &params.scorer, &mut grad.scorer) {
        (Head::Bilinear { u, .. }, Scorer::Bilinear { w_location, .. }, Scorer::Bilinear { w_species: gs, w_location: gl }) => {
            let mut s = vec![0.0; f];
            for (&cell, &d) in cells.iter().zip(dz) {
                s.iter_mut().zip(feats.row(cell)).for_each(|(acc, x)| *acc += d * x);
            }
            gl.add_outer(&s, u);
            let du = w_location.t_mul_vec(&s);
            gs.add_outer(emb, &du);
        }
        (Head::Attention { q, c, kappa, nu, window }, Scorer::CrossAttention(a), Scorer::CrossAttention(g)) => {
            let mut sk = vec![0.0; f];
            let mut sv = vec![0.0; f];
            for (&cell, &d) in cells.iter().zip(dz) {
                let neigh: Vec<usize> = window_cells(feats.spec(), cell, *window).collect();
                let tokens: Vec<(f64, f64)> =
                    neigh.iter().map(|&n| (dot(feats.row(n), kappa), dot(feats.row(n), nu))).collect();
                let (zbar, weights) = attend(&tokens);
                for ((&n, t), w) in neigh.iter().zip(&tokens).zip(&weights) {
                    let ds = d * w * (t.1 - zbar);
                    let dv = d * w;
                    let row = feats.row(n);
                    for i in 0..f {
                        sk[i] += ds * row[i];
                        sv[i] += dv * row[i];
                    }
                }
            }
            let scale = (q.len() as f64).sqrt();
            let q_scaled: Vec<f64> = q.iter().map(|x| x / scale).collect();
            g.w_k.add_outer(&sk, &q_scaled);
            g.w_v.add_outer(&sv, c);
            let dc = a.w_v.t_mul_vec(&sv);
            let mut dq: Vec<f64> = a.w_k.t_mul_vec(&sk).into_iter().map(|x| x / scale).collect();
            for j in 0..q.len() {
                g.w_out[j] += dc[j] * q[j];
                dq[j] += dc[j] * a.w_out[j];
            }
            g.w_q.add_outer(emb, &dq);
        }
        _ => unreachable!("gradient buffer matches the scorer kind"),
    }
}

fn to_grid(spec: GridSpec, logits: Vec<f64>) -> Result<PredictionGrid> {
    PredictionGrid::new(spec, logits.into_iter().map(sigmoid).collect())
        .map_err(|e| Error::Numerical(format!("scorer produced an invalid grid: {e}")))
}

pub fn score_bilinear(params: &ModelParams, emb: &SpeciesEmbedding, feats: &LocationFeatures) -> Result<PredictionGrid> {
    if params.kind() != ScorerKind::Bilinear {
        return Err(Error::Config("bilinear scoring needs bilinear parameters".into()));
    }
    predict_range(params, emb, feats)
}

pub fn score_cross_attention(
    params: &ModelParams,
    emb: &SpeciesEmbedding,
    feats: &LocationFeatures,
) -> Result<PredictionGrid> {
    if params.kind() != ScorerKind::CrossAttention {
        return Err(Error::Config("cross-attention scoring needs attention parameters".into()));
    }
    predict_range(params, emb, feats)
}

/// Scores every cell with the configured scorer. The embedding is passed by
/// value, so unseen species need no key lookup.
pub fn predict_range(params: &ModelParams, emb: &SpeciesEmbedding, feats: &LocationFeatures) -> Result<PredictionGrid> {
    params.check_inputs(emb, feats)?;
    let spec = *feats.spec();
    let head = Head::new(params, emb.vector());
    let logits = match &head {
        Head::Bilinear { v, .. } => feats
            .data()
            .par_chunks(feats.dim())
            .map(|row| dot(row, v) + params.bias)
            .collect(),
        Head::Attention { kappa, nu, window, .. } => {
            // Token scores and values are shared between overlapping windows.
            let tokens: Vec<(f64, f64)> =
                feats.data().par_chunks(feats.dim()).map(|row| (dot(row, kappa), dot(row, nu))).collect();
            (0..spec.len())
                .into_par_iter()
                .map(|cell| {
                    let local: Vec<(f64, f64)> = window_cells(&spec, cell, *window).map(|n| tokens[n]).collect();
                    attend(&local).0 + params.bias
                })
                .collect()
        }
    };
    to_grid(spec, logits)
}

/// Attention weights over the window of `cell`, paired with token cells.
pub fn attention_weights(
    params: &ModelParams,
    emb: &SpeciesEmbedding,
    feats: &LocationFeatures,
    cell: usize,
) -> Result<Vec<(usize, f64)>> {
    params.check_inputs(emb, feats)?;
    match Head::new(params, emb.vector()) {
        Head::Attention { kappa, nu, window, .. } => {
            let neigh: Vec<usize> = window_cells(feats.spec(), cell, window).collect();
            let tokens: Vec<(f64, f64)> =
                neigh.iter().map(|&n| (dot(feats.row(n), &kappa), dot(feats.row(n), &nu))).collect();
            Ok(neigh.into_iter().zip(attend(&tokens).1).collect())
        }
        Head::Bilinear { .. } => Err(Error::Config("attention weights need attention parameters".into())),
    }
}
