//! Multi-label losses over the locations of one queried species.
//!
//! Every loss takes a [`LossSample`]: predicted presence probabilities at a
//! set of labelled locations, plus (for AN-full and ME-full) predictions at
//! pseudo-negative locations. Each returns the scalar loss and its exact
//! derivative with respect to every prediction. The normaliser `S` is the
//! number of labelled locations; pseudo-negative terms share it.
//!
//! The logarithmic losses (AN-full, ME-full, ASL) clamp probabilities to
//! `[ε, 1 − ε]` with `ε = 1e-7` and evaluate the derivative at the clamped
//! point. RAL is polynomial and uses probabilities as given.

mod config;
mod pseudo;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::LossConfig;
pub use pseudo::{sample_pseudo_negatives, PseudoNegativeSampler};

use crate::error::{Error, Result};

pub const PROB_EPS: f64 = 1e-7;

/// Predictions and labels for one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    predictions: Vec<f64>,
    labels: Vec<bool>,
    pseudo_predictions: Vec<f64>,
}

impl LossSample {
    pub fn new(predictions: Vec<f64>, labels: Vec<bool>, pseudo_predictions: Vec<f64>) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::Domain("empty loss sample".into()));
        }
        if predictions.iter().chain(&pseudo_predictions).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Input("loss predictions must be probabilities".into()));
        }
        Ok(Self { predictions, labels, pseudo_predictions })
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn pseudo_predictions(&self) -> &[f64] {
        &self.pseudo_predictions
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loss value with gradients for labelled and pseudo-negative predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub pseudo_grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    AnFull,
    MeFull,
    Asl,
    Ral,
}

impl LossName {
    pub const ALL: [LossName; 4] = [LossName::AnFull, LossName::MeFull, LossName::Asl, LossName::Ral];

    pub fn as_str(self) -> &'static str {
        match self {
            LossName::AnFull => "an_full",
            LossName::MeFull => "me_full",
            LossName::Asl => "asl",
            LossName::Ral => "ral",
        }
    }

    /// Whether the loss has a pseudo-negative term.
    pub fn uses_pseudo_negatives(self) -> bool {
        matches!(self, LossName::AnFull | LossName::MeFull)
    }

    pub fn evaluate(self, sample: &LossSample, cfg: &LossConfig) -> Result<LossOutput> {
        match self {
            LossName::AnFull => an_full(sample, cfg),
            LossName::MeFull => me_full(sample, cfg),
            LossName::Asl => asl(sample, cfg),
            LossName::Ral => ral(sample, cfg),
        }
    }
}

impl fmt::Display for LossName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        LossName::ALL
            .into_iter()
            .find(|l| l.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown loss `{s}`; expected an_full, me_full, asl or ral")))
    }
}

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Sums per-element `(loss, derivative)` terms and scales by `1/S`.
fn reduce<P, N, Q>(sample: &LossSample, clamped: bool, pos: P, neg: N, pseudo: Option<Q>) -> LossOutput
where
    P: Fn(f64) -> (f64, f64),
    N: Fn(f64) -> (f64, f64),
    Q: Fn(f64) -> (f64, f64),
{
    let inv_s = 1.0 / sample.len() as f64;
    let clamp = |p: f64| if clamped { clamp(p) } else { p };
    let mut total = 0.0;
    let grad = sample
        .predictions
        .iter()
        .zip(&sample.labels)
        .map(|(&p, &y)| {
            let (l, d) = if y { pos(clamp(p)) } else { neg(clamp(p)) };
            total += l;
            d * inv_s
        })
        .collect();
    let pseudo_grad = match pseudo {
        Some(q) => sample
            .pseudo_predictions
            .iter()
            .map(|&r| {
                let (l, d) = q(clamp(r));
                total += l;
                d * inv_s
            })
            .collect(),
        None => vec![0.0; sample.pseudo_predictions.len()],
    };
    LossOutput { loss: total * inv_s, grad, pseudo_grad }
}

/// `−log(1 − p)` and its derivative.
fn assume_negative(p: f64) -> (f64, f64) {
    (-(-p).ln_1p(), 1.0 / (1.0 - p))
}

/// Negative binary entropy `−H(p)` and its derivative.
fn neg_entropy(p: f64) -> (f64, f64) {
    let q = 1.0 - p;
    (p * p.ln() + q * q.ln(), p.ln() - q.ln())
}

fn weighted_log_positive(weight: f64) -> impl Fn(f64) -> (f64, f64) {
    move |p| (-weight * p.ln(), -weight / p)
}

/// Full assume-negative loss.
pub fn an_full(sample: &LossSample, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    Ok(reduce(sample, true, weighted_log_positive(cfg.pos_weight), assume_negative, Some(assume_negative)))
}

/// Full maximum-entropy loss.
pub fn me_full(sample: &LossSample, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    Ok(reduce(sample, true, weighted_log_positive(cfg.pos_weight), neg_entropy, Some(neg_entropy)))
}

/// Asymmetric loss. Negatives use the shifted probability `max(p − τ, 0)`;
/// below the shift they contribute neither loss nor gradient.
pub fn asl(sample: &LossSample, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let (gp, gn, tau) = (cfg.gamma_pos, cfg.gamma_neg, cfg.tau);
    let pos = move |p: f64| {
        let q = 1.0 - p;
        let focus = q.powf(gp);
        let d_focus = if gp == 0.0 { 0.0 } else { -gp * q.powf(gp - 1.0) };
        (-focus * p.ln(), -(d_focus * p.ln() + focus / p))
    };
    let neg = move |p: f64| {
        let q = p - tau;
        if q <= 0.0 {
            return (0.0, 0.0);
        }
        let focus = q.powf(gn);
        let d_focus = if gn == 0.0 { 0.0 } else { gn * q.powf(gn - 1.0) };
        let log_term = (-q).ln_1p();
        (-focus * log_term, -(d_focus * log_term) + focus / (1.0 - q))
    };
    Ok(reduce(sample, true, pos, neg, None::<fn(f64) -> (f64, f64)>))
}

/// Robust asymmetric loss: polynomial positive terms and a Hill-weighted
/// polynomial on shifted negatives.
pub fn ral(sample: &LossSample, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let (gp, gn, tau, lambda) = (cfg.gamma_pos, cfg.gamma_neg, cfg.tau, cfg.lambda_hill);
    let (alpha, beta) = (&cfg.alpha_m, &cfg.beta_n);
    let pos = |p: f64| {
        let q = 1.0 - p;
        alpha.iter().zip(1..).fold((0.0, 0.0), |(l, d), (&a, m)| {
            let e = m as f64 + gp;
            (l + a * q.powf(e), d - a * e * q.powf(e - 1.0))
        })
    };
    let neg = |p: f64| {
        let q = p - tau;
        if q <= 0.0 {
            return (0.0, 0.0);
        }
        let (poly, d_poly) = beta.iter().zip(1..).fold((0.0, 0.0), |(s, d), (&b, n)| {
            let e = n as f64 + gn;
            (s + b * q.powf(e), d + b * e * q.powf(e - 1.0))
        });
        let psi = lambda - p;
        (psi * poly, -poly + psi * d_poly)
    };
    Ok(reduce(sample, false, pos, neg, None::<fn(f64) -> (f64, f64)>))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample(p: &[f64], y: &[bool], r: &[f64]) -> LossSample {
        LossSample::new(p.to_vec(), y.to_vec(), r.to_vec()).unwrap()
    }

    fn cfg_unit() -> LossConfig {
        LossConfig { pos_weight: 1.0, ..Default::default() }
    }

    #[test]
    fn an_full_single_positive() {
        let out = an_full(&sample(&[0.5], &[true], &[]), &cfg_unit()).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((out.grad[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn an_full_confident_negative_vanishes() {
        let out = an_full(&sample(&[1e-12], &[false], &[]), &cfg_unit()).unwrap();
        assert!(out.loss < 1e-6);
    }

    #[test]
    fn an_full_pseudo_term_shares_normaliser() {
        let out = an_full(&sample(&[0.5, 0.5], &[true, false], &[0.25]), &cfg_unit()).unwrap();
        let expected = -(0.5f64.ln() + 0.5f64.ln() + 0.75f64.ln()) / 2.0;
        assert!((out.loss - expected).abs() < 1e-15);
        assert!((out.pseudo_grad[0] - 1.0 / 0.75 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn me_full_max_entropy_point() {
        let out = me_full(&sample(&[0.5, 0.9], &[false, true], &[]), &cfg_unit()).unwrap();
        let expected = (-std::f64::consts::LN_2 - 0.9f64.ln()) / 2.0;
        assert!((out.loss - expected).abs() < 1e-15);
        assert_eq!(out.grad[0], 0.0);
        let pseudo = me_full(&sample(&[0.3], &[false], &[0.5]), &cfg_unit()).unwrap();
        assert_eq!(pseudo.pseudo_grad[0], 0.0);
    }

    #[test]
    fn asl_hard_threshold() {
        let cfg = LossConfig { tau: 0.1, ..Default::default() };
        let out = asl(&sample(&[0.05, 0.1], &[false, false], &[]), &cfg).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn asl_ignores_pseudo_negatives() {
        let out = asl(&sample(&[0.3], &[true], &[0.9, 0.8]), &LossConfig::default()).unwrap();
        assert_eq!(out.pseudo_grad, vec![0.0, 0.0]);
        let without = asl(&sample(&[0.3], &[true], &[]), &LossConfig::default()).unwrap();
        assert_eq!(out.loss, without.loss);
    }

    #[test]
    fn ral_examples() {
        let cfg = LossConfig { tau: 0.0, ..Default::default() };
        let pos = ral(&sample(&[1.0], &[true], &[]), &cfg).unwrap();
        assert_eq!(pos.loss, 0.0);
        // At p = 0.5 the Hill weight λ − p is exactly 1, leaving β₁·p^(1+γ⁻).
        let neg = ral(&sample(&[0.5], &[false], &[]), &cfg).unwrap();
        assert_eq!(neg.loss, 0.5f64.powi(5));
    }

    #[test]
    fn empty_and_mismatched_samples() {
        assert!(matches!(LossSample::new(vec![], vec![], vec![]), Err(Error::Domain(_))));
        assert!(matches!(LossSample::new(vec![0.5], vec![], vec![]), Err(Error::Input(_))));
        assert!(LossSample::new(vec![1.5], vec![true], vec![]).is_err());
    }

    #[test]
    fn loss_names() {
        for l in LossName::ALL {
            assert_eq!(l.as_str().parse::<LossName>().unwrap(), l);
        }
        assert_eq!("AN-full".parse::<LossName>().unwrap(), LossName::AnFull);
        assert!("focal".parse::<LossName>().is_err());
    }

    fn arb_sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0.0f64..=1.0, 0..10),
            )
        })
    }

    proptest! {
        #[test]
        fn non_negative_where_defined((p, y, r) in arb_sample(), tau in 0.0f64..0.5, gn in 0.0f64..6.0) {
            let s = LossSample::new(p, y, r).unwrap();
            let cfg = LossConfig { tau, gamma_neg: gn, ..Default::default() };
            for loss in [LossName::AnFull, LossName::Asl, LossName::Ral] {
                prop_assert!(loss.evaluate(&s, &cfg).unwrap().loss >= 0.0);
            }
        }

        #[test]
        fn asl_degenerates_to_bce((p, y, _r) in arb_sample()) {
            let s = LossSample::new(p, y, vec![]).unwrap();
            let zero = LossConfig { gamma_pos: 0.0, gamma_neg: 0.0, tau: 0.0, pos_weight: 1.0, ..Default::default() };
            let a = asl(&s, &zero).unwrap();
            let b = an_full(&s, &zero).unwrap();
            prop_assert!((a.loss - b.loss).abs() <= 1e-12 * b.loss.max(1.0));
            for (ga, gb) in a.grad.iter().zip(&b.grad) {
                prop_assert!((ga - gb).abs() <= 1e-12 * gb.abs().max(1.0));
            }
        }

        #[test]
        fn permutation_invariant((p, y, r) in arb_sample(), rot in 0usize..40) {
            let n = p.len();
            let k = rot % n;
            let mut p2 = p.clone();
            let mut y2 = y.clone();
            p2.rotate_left(k);
            y2.rotate_left(k);
            let a = LossSample::new(p, y, r.clone()).unwrap();
            let b = LossSample::new(p2, y2, r).unwrap();
            let cfg = LossConfig::default();
            for loss in LossName::ALL {
                let la = loss.evaluate(&a, &cfg).unwrap();
                let lb = loss.evaluate(&b, &cfg).unwrap();
                prop_assert!((la.loss - lb.loss).abs() <= 1e-12 * la.loss.abs().max(1.0));
                let mut ga = la.grad.clone();
                ga.rotate_left(k);
                prop_assert_eq!(ga, lb.grad);
            }
        }
    }
}
