use crate::error::{Error, Result};
use crate::grid::{PredictionGrid, PresenceGrid};
use crate::proximity::ProximityField;

use super::pwcd::{check_triplet, PwcdConfig};

/// Cell indices by descending probability, ties broken by ascending row-major index.
pub fn ranked_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Average precision where a negative cell at index `i` counts as
/// `fp_cost(i)` false positives instead of one.
pub fn average_precision<F>(pred: &PredictionGrid, truth: &PresenceGrid, fp_cost: F) -> Result<f64>
where
    F: Fn(usize) -> f64,
{
    truth.spec().check_same(pred.spec(), "prediction vs truth")?;
    let n_pos = truth.n_positive();
    if n_pos == 0 {
        return Err(Error::Domain("no presence cells in ground truth".into()));
    }
    let (mut tp, mut fp, mut sum) = (0.0f64, 0.0f64, 0.0f64);
    for i in ranked_order(pred.values()) {
        if truth.is_present(i) {
            tp += 1.0;
            sum += tp / (tp + fp);
        } else {
            fp += fp_cost(i);
        }
    }
    Ok(sum / n_pos as f64)
}

/// Proximity-adjusted average precision for one species.
///
/// True positives keep unit weight; each negative cell ranked above a hit
/// contributes its PWCD weight to the false-positive count. As `alpha` grows
/// this converges to [`map_plain`] whenever negative cells have non-zero
/// probability.
pub fn map_pa(pred: &PredictionGrid, truth: &PresenceGrid, prox: &ProximityField, cfg: &PwcdConfig) -> Result<f64> {
    check_triplet(pred, truth, prox)?;
    cfg.validate()?;
    let p = pred.values();
    average_precision(pred, truth, |i| cfg.weight(p[i], prox.at(i)))
}

/// Textbook average precision with unit-cost false positives.
pub fn map_plain(pred: &PredictionGrid, truth: &PresenceGrid) -> Result<f64> {
    average_precision(pred, truth, |_| 1.0)
}

/// ROC AUC via the Mann–Whitney rank sum, ties given their mid-rank.
pub fn auc(pred: &PredictionGrid, truth: &PresenceGrid) -> Result<f64> {
    truth.spec().check_same(pred.spec(), "prediction vs truth")?;
    let n_pos = truth.n_positive();
    let n_neg = truth.n_negative();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("AUC needs at least one presence and one absence cell".into()));
    }
    let values = pred.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        let hits = order[start..end].iter().filter(|&&i| truth.is_present(i)).count();
        rank_sum += mid * hits as f64;
        start = end;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::grid::GridSpec;
    use crate::proximity::distance_transform;

    fn setup(mask: &[bool], p: Vec<f64>, rows: usize, cols: usize) -> (PredictionGrid, PresenceGrid, ProximityField) {
        let spec = GridSpec::from_shape(rows, cols).unwrap();
        let truth = PresenceGrid::from_mask(spec, mask).unwrap();
        let prox = distance_transform(&truth).unwrap();
        (PredictionGrid::new(spec, p).unwrap(), truth, prox)
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let mask = [false, true, true, false, false, true, false, false];
        let p = mask.iter().map(|&b| f64::from(u8::from(b))).collect();
        let (pred, truth, prox) = setup(&mask, p, 2, 4);
        assert_eq!(map_pa(&pred, &truth, &prox, &PwcdConfig::default()).unwrap(), 1.0);
        assert_eq!(map_plain(&pred, &truth).unwrap(), 1.0);
        assert_eq!(auc(&pred, &truth).unwrap(), 1.0);
    }

    #[test]
    fn constant_prediction_auc_is_half() {
        let mask = [true, false, false, true, false];
        let (pred, truth, _) = setup(&mask, vec![0.3; 5], 1, 5);
        assert_eq!(auc(&pred, &truth).unwrap(), 0.5);
    }

    #[test]
    fn near_false_positive_is_forgiven() {
        // Presence at columns 5 and 79; a confident false positive at column
        // `5 + d` ranks between the two hits through the row-major tie-break.
        let cols = 80;
        let mut prev = f64::INFINITY;
        for d in [1usize, 2, 5, 10, 20] {
            let mut mask = vec![false; cols];
            mask[5] = true;
            mask[79] = true;
            let mut p = vec![0.0; cols];
            p[5] = 1.0;
            p[79] = 1.0;
            p[5 + d] = 1.0;
            let (pred, truth, prox) = setup(&mask, p, 1, cols);
            let pa = map_pa(&pred, &truth, &prox, &PwcdConfig::default()).unwrap();
            let plain = map_plain(&pred, &truth).unwrap();
            assert!((plain - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
            let w = 1.0 - (-0.1 * d as f64).exp();
            assert!((pa - (1.0 + 2.0 / (2.0 + w)) / 2.0).abs() < 1e-15);
            assert!(pa > plain);
            assert!(pa < prev);
            prev = pa;
        }
    }

    #[test]
    fn no_positives_is_domain_error() {
        let (pred, truth, _) = setup(&[true, false], vec![0.1, 0.2], 1, 2);
        let empty = PresenceGrid::zeros(*truth.spec());
        assert!(matches!(map_plain(&pred, &empty), Err(Error::Domain(_))));
        assert!(matches!(auc(&pred, &empty), Err(Error::Domain(_))));
    }

    #[test]
    fn tie_break_is_row_major() {
        assert_eq!(ranked_order(&[0.5, 0.9, 0.5, 0.9]), vec![1, 3, 0, 2]);
    }

    proptest! {
        #[test]
        fn pa_never_below_plain(
            mask in prop::collection::vec(prop::bool::weighted(0.3), 30),
            p in prop::collection::vec(0.0f64..=1.0, 30),
            alpha in 0.01f64..10.0,
        ) {
            let mut mask = mask;
            mask[0] = true;
            let (pred, truth, prox) = setup(&mask, p, 5, 6);
            let cfg = PwcdConfig::new(alpha).unwrap();
            let pa = map_pa(&pred, &truth, &prox, &cfg).unwrap();
            let plain = map_plain(&pred, &truth).unwrap();
            prop_assert!(pa >= plain - 1e-15);
            prop_assert!((0.0..=1.0).contains(&pa));
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            mask in prop::collection::vec(prop::bool::weighted(0.4), 40),
            p in prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]), 40),
        ) {
            let mut mask = mask;
            mask[0] = true;
            mask[1] = false;
            let (pred, truth, _) = setup(&mask, p.clone(), 4, 10);
            let squashed = PredictionGrid::new(*truth.spec(), p.iter().map(|v| v.powi(3) * 0.5 + 0.1).collect()).unwrap();
            prop_assert_eq!(auc(&pred, &truth).unwrap(), auc(&squashed, &truth).unwrap());
        }
    }
}
