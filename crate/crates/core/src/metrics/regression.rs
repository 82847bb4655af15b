//! Closed-form ridge regression from location features to a per-cell target.
//!
//! Cells are split in a checkerboard: `(row + col)` even cells train, odd
//! cells are held out. Features and target are centred on the training split
//! so the intercept is not penalised.

use nalgebra::{DMatrix, DVector};

use crate::encoders::LocationFeatures;
use crate::error::{Error, Result};

/// Pivot ratio below which the normal equations count as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Minimises `Σ (y − b − w·x)² + λ‖w‖²` over `w` and `b`.
///
/// `rows` holds one feature vector per sample, all of length `dim`.
pub fn fit_ridge(rows: &[&[f64]], y: &[f64], lambda: f64) -> Result<RidgeFit> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("ridge lambda must be non-negative, got {lambda}")));
    }
    if rows.len() != y.len() || rows.is_empty() {
        return Err(Error::Input(format!("ridge: {} feature rows vs {} targets", rows.len(), y.len())));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Input("ridge: ragged feature rows".into()));
    }
    let n = rows.len() as f64;
    let mut mean_x = vec![0.0; dim];
    for r in rows {
        mean_x.iter_mut().zip(*r).for_each(|(m, v)| *m += v / n);
    }
    let mean_y = y.iter().sum::<f64>() / n;

    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut centred = vec![0.0; dim];
    for (r, &t) in rows.iter().zip(y) {
        centred.iter_mut().zip(*r).zip(&mean_x).for_each(|((c, v), m)| *c = v - m);
        let dt = t - mean_y;
        for i in 0..dim {
            rhs[i] += centred[i] * dt;
            for j in 0..=i {
                gram[(i, j)] += centred[i] * centred[j];
            }
        }
    }
    for i in 0..dim {
        gram[(i, i)] += lambda;
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }

    let singular = || {
        Error::Numerical("ridge normal equations are singular; use a positive lambda".into())
    };
    let scale = (0..dim).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    let chol = gram.cholesky().ok_or_else(singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    if dim > 0 && !(min_pivot > SINGULAR_PIVOT_RATIO * scale) {
        return Err(singular());
    }
    let w = chol.solve(&rhs);
    let intercept = mean_y - w.iter().zip(&mean_x).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeFit { weights: w.iter().copied().collect(), intercept })
}

/// Held-out coefficient of determination of a ridge fit from `feats` to `target`.
///
/// Cells where `valid` is false, or where the target is not finite, are
/// excluded from both splits.
pub fn ridge_r2(feats: &LocationFeatures, target: &[f64], valid: Option<&[bool]>, lambda: f64) -> Result<f64> {
    let spec = feats.spec();
    if target.len() != spec.len() || valid.is_some_and(|v| v.len() != spec.len()) {
        return Err(Error::Input("ridge: target or mask does not match feature grid".into()));
    }
    let usable = |i: usize| target[i].is_finite() && valid.is_none_or(|v| v[i]);
    let parity = |i: usize| {
        let (r, c) = spec.row_col(i);
        (r + c) % 2
    };

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in (0..spec.len()).filter(|&i| usable(i) && parity(i) == 0) {
        xs.push(feats.row(i));
        ys.push(target[i]);
    }
    let fit = fit_ridge(&xs, &ys, lambda)?;

    let held: Vec<usize> = (0..spec.len()).filter(|&i| usable(i) && parity(i) == 1).collect();
    if held.is_empty() {
        return Err(Error::Domain("ridge: no held-out cells".into()));
    }
    let mean = held.iter().map(|&i| target[i]).sum::<f64>() / held.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &i in &held {
        ss_res += (target[i] - fit.predict(feats.row(i))).powi(2);
        ss_tot += (target[i] - mean).powi(2);
    }
    if ss_tot == 0.0 {
        return Err(Error::Domain("ridge: held-out target is constant".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Unweighted mean of [`ridge_r2`] over several targets.
pub fn mean_ridge_r2(feats: &LocationFeatures, targets: &[Vec<f64>], valid: Option<&[bool]>, lambda: f64) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Input("ridge: no targets".into()));
    }
    let mut total = 0.0;
    for t in targets {
        total += ridge_r2(feats, t, valid, lambda)?;
    }
    Ok(total / targets.len() as f64)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::grid::GridSpec;

    fn random_features(rows: usize, cols: usize, dim: usize, rng: &mut ChaCha8Rng) -> LocationFeatures {
        let spec = GridSpec::from_shape(rows, cols).unwrap();
        let data = (0..spec.len() * dim).map(|_| rng.sample(StandardNormal)).collect();
        LocationFeatures::new(spec, dim, data).unwrap()
    }

    #[test]
    fn exact_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let feats = random_features(10, 20, 5, &mut rng);
        let target: Vec<f64> = (0..200)
            .map(|i| {
                let x = feats.row(i);
                3.0 + 2.0 * x[0] - 1.5 * x[1] + 0.25 * x[4]
            })
            .collect();
        let r2 = ridge_r2(&feats, &target, None, 0.0).unwrap();
        assert!((r2 - 1.0).abs() < 1e-9, "{r2}");
    }

    #[test]
    fn noise_target_has_no_skill() {
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let feats = random_features(20, 40, 5, &mut rng);
            let target: Vec<f64> = (0..800).map(|_| rng.sample(StandardNormal)).collect();
            total += ridge_r2(&feats, &target, None, 1.0).unwrap();
        }
        assert!(total / 20.0 <= 0.05, "{}", total / 20.0);
    }

    #[test]
    fn matches_gradient_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100;
        let dim = 5;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] - 2.0 * r[2] + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let lambda = 2.0;
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let fit = fit_ridge(&rows, &y, lambda).unwrap();

        // Plain gradient descent on the same objective, intercept unpenalised.
        let (mut w, mut b) = (vec![0.0; dim], 0.0);
        let lr = 2e-3;
        for _ in 0..50_000 {
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (r, &t) in x.iter().zip(&y) {
                let e = b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() - t;
                gb += 2.0 * e;
                gw.iter_mut().zip(r).for_each(|(g, v)| *g += 2.0 * e * v);
            }
            gw.iter_mut().zip(&w).for_each(|(g, wi)| *g += 2.0 * lambda * wi);
            w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= lr * g);
            b -= lr * gb;
        }
        for (a, c) in fit.weights.iter().zip(&w) {
            assert!((a - c).abs() < 1e-6, "{a} vs {c}");
        }
        assert!((fit.intercept - b).abs() < 1e-6);
    }

    #[test]
    fn singular_system_needs_lambda() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ridge(&rows, &y, 0.0), Err(Error::Numerical(_))));
        assert!(fit_ridge(&rows, &y, 0.1).is_ok());
    }
}
