//! Evaluation metrics: binned multiclass accuracy, binary F1, mean absolute
//! error, and Pearson correlation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Named metric values from one evaluation pass.
#[derive(Debug, Clone, Default)]
pub struct EvalResult {
    pub metrics: BTreeMap<String, f64>,
    pub count: usize,
}

impl EvalResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }
}

impl std::fmt::Display for EvalResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .metrics
            .iter()
            .map(|(k, v)| format!("{k}={v:.4}"))
            .collect();
        write!(f, "n={} {}", self.count, parts.join(" "))
    }
}

/// Bin index under sorted edges: bins are half-open with each edge belonging
/// to the bin below it, so `bin(x) = #{e : x > e}`.
fn bin(value: f64, edges: &[f64]) -> usize {
    edges.iter().filter(|&&e| value > e).count()
}

/// Fraction of samples whose prediction falls in the same bin as the target.
/// `edges` must be sorted and hold `classes - 1` entries.
pub fn accuracy_c(preds: &[f64], targets: &[f64], classes: usize, edges: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::Metric(format!(
            "accuracy over {} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Metric("accuracy of an empty sample".into()));
    }
    if classes < 2 || edges.len() != classes - 1 {
        return Err(Error::Metric(format!(
            "{classes} classes need {} edges, got {}",
            classes.saturating_sub(1),
            edges.len()
        )));
    }
    if edges.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Metric("bin edges must be sorted".into()));
    }
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| bin(**p, edges) == bin(**t, edges))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Two-class accuracy with the positive/non-positive split at zero.
pub fn accuracy_a2(preds: &[f64], targets: &[f64]) -> Result<f64> {
    accuracy_c(preds, targets, 2, &[0.0])
}

/// Seven-class accuracy on [-3, 3] scores: round to the nearest integer,
/// clamp into range, and compare.
pub fn accuracy_a7(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Metric(
            "seven-class accuracy needs equal-length non-empty samples".into(),
        ));
    }
    let to_class = |v: f64| v.round().clamp(-3.0, 3.0) as i64;
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| to_class(**p) == to_class(**t))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Binary F1 with its degenerate-input marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub value: f64,
    /// Set when no positive occurs in predictions or targets, in which case
    /// `value` is pinned to 0.
    pub degenerate: bool,
}

pub fn f1_binary(preds: &[bool], targets: &[bool]) -> Result<F1Score> {
    if preds.len() != targets.len() {
        return Err(Error::Metric(format!(
            "f1 over {} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fin = 0.0;
    for (&p, &t) in preds.iter().zip(targets) {
        match (p, t) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fin += 1.0,
            (false, false) => {}
        }
    }
    if tp + fp + fin == 0.0 {
        return Ok(F1Score {
            value: 0.0,
            degenerate: true,
        });
    }
    if tp == 0.0 {
        return Ok(F1Score {
            value: 0.0,
            degenerate: false,
        });
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fin);
    Ok(F1Score {
        value: 2.0 * precision * recall / (precision + recall),
        degenerate: false,
    })
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Metric(
            "mae needs equal-length non-empty samples".into(),
        ));
    }
    let total: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / preds.len() as f64)
}

/// Sample Pearson correlation. Errors (rather than returning 0) when either
/// argument has zero variance or fewer than two samples.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Metric(format!(
            "correlation over {} vs {} samples",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Metric(
            "correlation needs at least two samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric(
            "correlation undefined: an argument has zero variance".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_predictions_score_one() {
        let v = vec![0.3, -1.7, 2.2];
        assert_eq!(accuracy_c(&v, &v, 7, &[-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]).unwrap(), 1.0);
    }

    #[test]
    fn binary_split_counts_by_hand() {
        // Bins at zero: -1 is non-positive, 2 is positive; targets both positive.
        let acc = accuracy_c(&[-1.0, 2.0], &[1.0, 1.0], 2, &[0.0]).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn all_wrong_scores_zero() {
        let acc = accuracy_c(&[1.0, 1.0], &[-1.0, -1.0], 2, &[0.0]).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn edge_values_fall_in_the_lower_bin() {
        // 0 sits on the edge and belongs to the non-positive bin.
        let acc = accuracy_c(&[0.0], &[-2.0], 2, &[0.0]).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_rejects_bad_input() {
        assert!(accuracy_c(&[1.0], &[1.0, 2.0], 2, &[0.0]).is_err());
        assert!(accuracy_c(&[], &[], 2, &[0.0]).is_err());
        assert!(accuracy_c(&[1.0], &[1.0], 3, &[0.0]).is_err());
    }

    #[test]
    fn a7_rounds_and_clamps() {
        assert_eq!(accuracy_a7(&[2.4, -3.9], &[2.0, -3.0]).unwrap(), 1.0);
        assert_eq!(accuracy_a7(&[0.6], &[0.4]).unwrap(), 0.0);
    }

    #[test]
    fn f1_perfect_and_hand_counted() {
        let f = f1_binary(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!(f.value, 1.0);
        assert!(!f.degenerate);

        // TP=1, FP=1, FN=1 gives precision = recall = 0.5.
        let f = f1_binary(&[true, true, false], &[true, false, true]).unwrap();
        assert_eq!(f.value, 0.5);
    }

    #[test]
    fn f1_zero_without_positive_predictions() {
        let f = f1_binary(&[false, false], &[true, false]).unwrap();
        assert_eq!(f.value, 0.0);
        assert!(!f.degenerate);
    }

    #[test]
    fn f1_degenerate_without_any_positive() {
        let f = f1_binary(&[false, false], &[false, false]).unwrap();
        assert_eq!(f.value, 0.0);
        assert!(f.degenerate);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 4.0], &[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn mae_is_symmetric() {
        let a = vec![0.5, -2.0, 3.25];
        let b = vec![1.5, 0.0, -1.0];
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
    }

    #[test]
    fn pearson_self_and_anti_correlation() {
        let x = vec![1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_invariant_under_positive_affine_maps() {
        let x = vec![0.2, -1.0, 3.0, 2.5, -0.75];
        let y = vec![1.0, 0.5, 2.0, -0.25, 0.0];
        let base = pearson_r(&x, &y).unwrap();
        for (a, b) in [(2.0, 5.0), (0.25, -3.0), (17.5, 0.0)] {
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            assert!((pearson_r(&xs, &y).unwrap() - base).abs() < 1e-12);
            assert!((pearson_r(&x, &ys).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_rejects_degenerate_input() {
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
        assert!(pearson_r(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn order_permutation_leaves_accuracy_and_f1_unchanged() {
        let preds = vec![1.0, -0.5, 2.0, 0.25, -3.0];
        let targets = vec![0.5, -1.0, 1.5, -0.25, -2.0];
        let perm = [4usize, 2, 0, 3, 1];
        let p2: Vec<f64> = perm.iter().map(|&i| preds[i]).collect();
        let t2: Vec<f64> = perm.iter().map(|&i| targets[i]).collect();
        assert_eq!(
            accuracy_a2(&preds, &targets).unwrap(),
            accuracy_a2(&p2, &t2).unwrap()
        );

        let bp: Vec<bool> = preds.iter().map(|&v| v > 0.0).collect();
        let bt: Vec<bool> = targets.iter().map(|&v| v > 0.0).collect();
        let bp2: Vec<bool> = perm.iter().map(|&i| bp[i]).collect();
        let bt2: Vec<bool> = perm.iter().map(|&i| bt[i]).collect();
        assert_eq!(f1_binary(&bp, &bt).unwrap(), f1_binary(&bp2, &bt2).unwrap());
    }
}
