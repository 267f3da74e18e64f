//! Training losses and soft classification targets.

use crate::error::{Error, Result};
use crate::numcore::{Tape, Tensor};

/// Absolute-error loss `|pred - target|`; the subgradient at equality is
/// zero. Matches the reporting metric for regression.
pub fn loss_regression(tape: &Tape, pred: &Tensor, target: f64) -> Result<Tensor> {
    if pred.len() != 1 {
        return Err(Error::Contract(format!(
            "regression loss expects a scalar prediction, got shape {:?}",
            pred.shape()
        )));
    }
    let diff = tape.sub(pred, &Tensor::scalar(target))?;
    tape.abs(&diff)
}

const TARGET_SUM_TOL: f64 = 1e-6;

/// Cross-entropy against a target distribution:
/// `-sum(target * log_softmax(logits))`.
pub fn loss_classification(tape: &Tape, logits: &Tensor, target_dist: &Tensor) -> Result<Tensor> {
    if logits.shape() != target_dist.shape() {
        return Err(Error::ShapeMismatch {
            op: "loss_classification",
            lhs: logits.shape(),
            rhs: target_dist.shape(),
        });
    }
    let total: f64 = target_dist.data().iter().sum();
    if (total - 1.0).abs() > TARGET_SUM_TOL || target_dist.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Contract(format!(
            "target distribution must be a probability vector (sum {total})"
        )));
    }
    let log_probs = tape.log_softmax(logits)?;
    let weighted = tape.hadamard(target_dist, &log_probs)?;
    let total = tape.sum(&weighted)?;
    tape.scale(&total, -1.0)
}

/// Smoothed one-hot target: `1 - smoothing` on the true class, the remaining
/// mass spread evenly over the others.
pub fn soft_targets(class_id: usize, classes: usize, smoothing: f64) -> Result<Tensor> {
    if classes < 2 {
        return Err(Error::Config(format!(
            "soft targets need at least 2 classes, got {classes}"
        )));
    }
    if class_id >= classes {
        return Err(Error::Contract(format!(
            "class id {class_id} out of range for {classes} classes"
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Config(format!(
            "smoothing must lie in [0, 1), got {smoothing}"
        )));
    }
    let off = smoothing / (classes - 1) as f64;
    let mut data = vec![off; classes];
    data[class_id] = 1.0 - smoothing;
    Ok(Tensor::vector(data))
}
