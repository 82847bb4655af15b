//! Central finite differences against the analytic loss gradients.
//!
//! Each element of a random 64-element sample is checked on its own
//! one-element sample, where the loss value is the element's own term and
//! roundoff cannot swamp small derivatives. A separate check confirms that
//! the full-sample loss and gradient are exactly the per-element terms
//! scaled by `1/S`, which carries the per-element result to the full sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangekit::losses::{LossConfig, LossName, LossSample};

const N_SAMPLES: usize = 50;
const SAMPLE_LEN: usize = 64;
const REL_TOL: f64 = 1e-5;

fn random_sample(rng: &mut ChaCha8Rng, tau: f64) -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let mut draw = || loop {
        let p: f64 = rng.random_range(0.01..0.99);
        // Stay clear of the kink of max(p − τ, 0).
        if (p - tau).abs() > 1e-3 {
            return p;
        }
    };
    let p: Vec<f64> = (0..SAMPLE_LEN).map(|_| draw()).collect();
    let r: Vec<f64> = (0..SAMPLE_LEN / 4).map(|_| draw()).collect();
    let y: Vec<bool> = (0..SAMPLE_LEN).map(|i| i % 3 == 0).collect();
    (p, y, r)
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.min(1.0 - x);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= REL_TOL * an.abs().max(1e-12)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for loss in LossName::ALL {
        for _ in 0..N_SAMPLES {
            let (p, y, r) = random_sample(&mut rng, cfg.tau);
            for (&pi, &yi) in p.iter().zip(&y) {
                let eval = |x: f64| loss.evaluate(&LossSample::new(vec![x], vec![yi], vec![]).unwrap(), &cfg).unwrap();
                let an = eval(pi).grad[0];
                let fd = central_difference(|x| eval(x).loss, pi);
                assert!(close(fd, an), "{loss} label {yi} p {pi}: fd {fd} vs {an}");
            }
            if loss.uses_pseudo_negatives() {
                for &ri in &r {
                    let eval = |x: f64| loss.evaluate(&LossSample::new(vec![0.5], vec![false], vec![x]).unwrap(), &cfg).unwrap();
                    let an = eval(ri).pseudo_grad[0];
                    let fd = central_difference(|x| eval(x).loss, ri);
                    assert!(close(fd, an), "{loss} pseudo {ri}: fd {fd} vs {an}");
                }
            }
        }
    }
}

#[test]
fn full_sample_is_the_scaled_sum_of_elements() {
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for loss in LossName::ALL {
        for _ in 0..N_SAMPLES {
            let (p, y, r) = random_sample(&mut rng, cfg.tau);
            let full = loss.evaluate(&LossSample::new(p.clone(), y.clone(), r.clone()).unwrap(), &cfg).unwrap();
            let s = SAMPLE_LEN as f64;
            let mut total = 0.0;
            for (i, (&pi, &yi)) in p.iter().zip(&y).enumerate() {
                let one = loss.evaluate(&LossSample::new(vec![pi], vec![yi], vec![]).unwrap(), &cfg).unwrap();
                total += one.loss;
                assert!((full.grad[i] - one.grad[0] / s).abs() <= 1e-15 * one.grad[0].abs().max(1.0));
            }
            if loss.uses_pseudo_negatives() {
                let base = loss.evaluate(&LossSample::new(vec![0.5], vec![false], vec![]).unwrap(), &cfg).unwrap().loss;
                for (j, &rj) in r.iter().enumerate() {
                    let one = loss.evaluate(&LossSample::new(vec![0.5], vec![false], vec![rj]).unwrap(), &cfg).unwrap();
                    total += one.loss - base;
                    assert!((full.pseudo_grad[j] - one.pseudo_grad[0] / s).abs() <= 1e-15 * one.pseudo_grad[0].abs().max(1.0));
                }
            } else {
                assert!(full.pseudo_grad.iter().all(|&g| g == 0.0));
            }
            assert!((full.loss - total / s).abs() <= 1e-12 * full.loss.abs().max(1.0), "{loss}");
        }
    }
}
