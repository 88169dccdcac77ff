//! Fairness and performance metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summary of a finished run's reward allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Pearson ρ between final accuracies and contributions; `None` when undefined.
    pub pearson: Option<f64>,
    /// Mean collaboration gain.
    pub mcg: f64,
    /// Collaboration gain spread (population standard deviation of gains).
    pub cgs: f64,
    /// `max(gain) - min(gain)`, reported next to `cgs`.
    pub gain_range: f64,
    /// Fraction of clients with non-negative gain.
    pub ir_rate: f64,
    pub gains: Vec<f64>,
}

impl MetricReport {
    pub fn new(accuracies: &[f64], contributions: &[f64]) -> Result<Self> {
        let (mcg, cgs) = gain_stats(accuracies, contributions)?;
        let gains: Vec<f64> = accuracies.iter().zip(contributions).map(|(a, c)| a - c).collect();
        let gain_range = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - gains.iter().copied().fold(f64::INFINITY, f64::min);
        let pearson = if accuracies.len() >= 2 { pearson(accuracies, contributions)? } else { None };
        Ok(Self { pearson, mcg, cgs, gain_range, ir_rate: ir_rate(&gains), gains })
    }
}

/// Mean per-class recall over the classes present in `labels`.
pub fn balanced_accuracy(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Argument("balanced accuracy of an empty label set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= classes {
            return Err(Error::Argument(format!("label {y} out of range for {classes} classes")));
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    let (sum, present) = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .fold((0.0, 0usize), |(s, k), (&h, &t)| (s + h as f64 / t as f64, k + 1));
    Ok(sum / present as f64)
}

/// Sample Pearson correlation. `Ok(None)` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("pearson on lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Argument("pearson needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Average ranks (1-based), ties share the mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("spearman on lengths {} and {}", x.len(), y.len())));
    }
    pearson(&ranks(x), &ranks(y))
}

/// `(mean gain, population std of gains)` for gains `a - c`.
pub fn gain_stats(accuracies: &[f64], contributions: &[f64]) -> Result<(f64, f64)> {
    if accuracies.len() != contributions.len() {
        return Err(Error::Argument(format!(
            "{} accuracies for {} contributions",
            accuracies.len(),
            contributions.len()
        )));
    }
    if accuracies.is_empty() {
        return Err(Error::Argument("gain statistics of zero clients".into()));
    }
    let n = accuracies.len() as f64;
    let gains: Vec<f64> = accuracies.iter().zip(contributions).map(|(a, c)| a - c).collect();
    let mean = gains.iter().sum::<f64>() / n;
    let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

pub fn ir_rate(gains: &[f64]) -> f64 {
    if gains.is_empty() {
        return 1.0;
    }
    gains.iter().filter(|&&g| g >= 0.0).count() as f64 / gains.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_accuracy_cases() {
        assert_eq!(balanced_accuracy(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap(), 0.75);
        // class 2 absent from labels is excluded
        assert_eq!(balanced_accuracy(&[0, 2], &[0, 1], 3).unwrap(), 0.5);
        assert!(balanced_accuracy(&[], &[], 2).is_err());
    }

    #[test]
    fn pearson_cases() {
        let x = [0.1, 0.5, 0.2, 0.9];
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.3).collect();
        assert!((pearson(&x, &shifted).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap().unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), None);
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_handles_ties() {
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.2, 0.2, 0.5]).unwrap().unwrap();
        assert!(rho > 0.9 && rho < 1.0);
    }

    #[test]
    fn gain_stat_cases() {
        assert_eq!(gain_stats(&[0.4, 0.5], &[0.4, 0.5]).unwrap(), (0.0, 0.0));
        let (m, s) = gain_stats(&[0.5, 0.7], &[0.2, 0.4]).unwrap();
        assert!((m - 0.3).abs() < 1e-12 && s.abs() < 1e-12);
        let (m, s) = gain_stats(&[0.1, 0.3], &[0.0, 0.0]).unwrap();
        assert!((m - 0.2).abs() < 1e-12 && (s - 0.1).abs() < 1e-12);
        assert!(gain_stats(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn report_counts_ir_violations() {
        let r = MetricReport::new(&[0.5, 0.3, 0.9], &[0.4, 0.4, 0.8]).unwrap();
        assert!((r.ir_rate - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.gain_range - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pearson_is_positive_affine_invariant(
            x in prop::collection::vec(-10.0f64..10.0, 3..12),
            a in 0.1f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v - i as f64).collect();
            let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            if let (Some(r1), Some(r2)) = (pearson(&x, &y).unwrap(), pearson(&x2, &y).unwrap()) {
                prop_assert!((r1 - r2).abs() < 1e-9);
            }
        }

        #[test]
        fn cgs_zero_iff_equal_gains(c in prop::collection::vec(0.0f64..1.0, 1..8), g in 0.0f64..0.5) {
            let a: Vec<f64> = c.iter().map(|v| v + g).collect();
            let (_, cgs) = gain_stats(&a, &c).unwrap();
            prop_assert!(cgs < 1e-12);
            if c.len() > 1 {
                let mut a2 = a.clone();
                a2[0] += 0.1;
                prop_assert!(gain_stats(&a2, &c).unwrap().1 > 0.0);
            }
        }

        #[test]
        fn balanced_accuracy_bounds(labels in prop::collection::vec(0usize..4, 1..40), seed in 0usize..4) {
            let preds: Vec<usize> = labels.iter().enumerate().map(|(i, _)| (i + seed) % 4).collect();
            let b = balanced_accuracy(&preds, &labels, 4).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }
    }

    #[test]
    fn balanced_equals_plain_on_balanced_labels() {
        let labels = [0, 0, 1, 1, 2, 2];
        let preds = [0, 1, 1, 1, 0, 2];
        let plain = preds.iter().zip(&labels).filter(|(p, y)| p == y).count() as f64 / 6.0;
        assert!((balanced_accuracy(&preds, &labels, 3).unwrap() - plain).abs() < 1e-12);
    }
}
