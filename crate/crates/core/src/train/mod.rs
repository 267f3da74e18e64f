//! Training loop, evaluation, and the line-oriented run log.

mod adam;
mod grad_check;
mod loss;

pub use adam::{AdamConfig, AdamState};
pub use grad_check::{
    example_loss, grad_check, numerical_gradient, GradCheckReport, TensorCheck, DEFAULT_FD_STEP,
};
pub use loss::{loss_classification, loss_regression, soft_targets};

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Label, MultimodalExample};
use crate::error::{Error, Result};
use crate::metrics::{accuracy_a2, accuracy_a7, f1_binary, mae, pearson_r, EvalResult};
use crate::model::{Mode, ModelParams, Task};
use crate::numcore::Tape;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; `None`
    /// disables early stopping.
    pub patience: Option<usize>,
    /// Label smoothing applied to classification targets.
    pub smoothing: f64,
    /// First epoch number minus one; lets resumed runs keep counting.
    pub start_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
            patience: Some(20),
            smoothing: 0.1,
            start_epoch: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Option<EvalResult>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// One line per epoch plus a trailing summary record.
    pub fn write_log(&self, out: &mut impl Write) -> Result<()> {
        for rec in &self.epochs {
            write!(out, "epoch\t{}\ttrain_loss\t{:.6}", rec.epoch, rec.train_loss)?;
            if let Some(val) = &rec.validation {
                for (name, value) in &val.metrics {
                    write!(out, "\tval_{name}\t{value:.6}")?;
                }
            }
            writeln!(out, "\tseconds\t{:.3}", rec.seconds)?;
        }
        write!(out, "summary\tepochs_run\t{}", self.epochs.len())?;
        if let (Some(e), Some(m)) = (self.best_epoch, self.best_metric) {
            write!(out, "\tbest_epoch\t{e}\tbest_val_metric\t{m:.6}")?;
        }
        writeln!(out, "\tstopped_early\t{}", self.stopped_early)?;
        Ok(())
    }
}

/// The validation metric early stopping watches, and its direction.
fn primary_metric(task: Task, result: &EvalResult) -> Option<(f64, bool)> {
    match task {
        // Lower is better.
        Task::Regression => result.get("mae").map(|v| (v, false)),
        // Higher is better.
        Task::Classification { .. } => result.get("accuracy").map(|v| (v, true)),
    }
}

/// Eval-mode metrics over a dataset. Regression reports mae, correlation
/// (when defined), and binned accuracies; classification reports accuracy
/// plus binary F1 when two classes exist.
pub fn evaluate(params: &ModelParams, examples: &[MultimodalExample]) -> Result<EvalResult> {
    if examples.is_empty() {
        return Err(Error::Validation("evaluation on an empty dataset".into()));
    }
    let mut result = EvalResult {
        count: examples.len(),
        ..Default::default()
    };
    match params.config.task {
        Task::Regression => {
            let mut preds = Vec::with_capacity(examples.len());
            let mut targets = Vec::with_capacity(examples.len());
            for ex in examples {
                let tape = Tape::new();
                let out = params.forward(&tape, ex, Mode::Eval, false)?;
                preds.push(out.prediction.item()?);
                targets.push(ex.label.as_real()?);
            }
            result.insert("mae", mae(&preds, &targets)?);
            result.insert("a2", accuracy_a2(&preds, &targets)?);
            result.insert("a7", accuracy_a7(&preds, &targets)?);
            let pos_p: Vec<bool> = preds.iter().map(|&v| v > 0.0).collect();
            let pos_t: Vec<bool> = targets.iter().map(|&v| v > 0.0).collect();
            result.insert("f1", f1_binary(&pos_p, &pos_t)?.value);
            if let Ok(r) = pearson_r(&preds, &targets) {
                result.insert("r", r);
            }
        }
        Task::Classification { classes } => {
            let mut pred_classes = Vec::with_capacity(examples.len());
            let mut target_classes = Vec::with_capacity(examples.len());
            for ex in examples {
                let tape = Tape::new();
                let out = params.forward(&tape, ex, Mode::Eval, false)?;
                let logits = out.prediction.to_vec();
                let argmax = logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                pred_classes.push(argmax);
                let target = ex.label.as_class()?;
                if target >= classes {
                    return Err(Error::Validation(format!(
                        "example {} has class {target} outside 0..{classes}",
                        ex.id
                    )));
                }
                target_classes.push(target);
            }
            let hits = pred_classes
                .iter()
                .zip(&target_classes)
                .filter(|(p, t)| p == t)
                .count();
            result.insert("accuracy", hits as f64 / examples.len() as f64);
            if classes == 2 {
                let p: Vec<bool> = pred_classes.iter().map(|&c| c == 1).collect();
                let t: Vec<bool> = target_classes.iter().map(|&c| c == 1).collect();
                result.insert("f1", f1_binary(&p, &t)?.value);
            }
        }
    }
    Ok(result)
}

fn check_labels(task: Task, examples: &[MultimodalExample]) -> Result<()> {
    for ex in examples {
        match (task, &ex.label) {
            (Task::Regression, Label::Real(_)) => {}
            (Task::Classification { .. }, Label::Class(_)) => {}
            _ => {
                return Err(Error::Validation(format!(
                    "example {} label does not match task {}",
                    ex.id,
                    task.name()
                )))
            }
        }
    }
    Ok(())
}

/// Per-example loss op on the given tape.
fn example_loss_op(
    tape: &Tape,
    params: &ModelParams,
    example: &MultimodalExample,
    smoothing: f64,
    rng: &mut ChaCha8Rng,
) -> Result<crate::numcore::Tensor> {
    let out = params.forward(tape, example, Mode::Train(rng), false)?;
    match params.config.task {
        Task::Regression => loss_regression(tape, &out.prediction, example.label.as_real()?),
        Task::Classification { classes } => {
            let target = soft_targets(example.label.as_class()?, classes, smoothing)?;
            loss_classification(tape, &out.prediction, &target)
        }
    }
}

/// Mini-batch Adam training. Per batch: zero the gradients, accumulate every
/// example's backward pass (each loss scaled by 1/batch-size so the batch
/// gradient is the mean), then one optimizer step. Deterministic for a fixed
/// (seed, config, dataset): the shuffle schedule and dropout masks come from
/// one seeded stream.
///
/// When a validation set is supplied the best parameters (by the task's
/// primary metric) are restored at the end; with `patience` set, training
/// stops after that many epochs without improvement.
pub fn train(
    params: &ModelParams,
    train_set: &[MultimodalExample],
    val_set: &[MultimodalExample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    check_labels(params.config.task, train_set)?;
    check_labels(params.config.task, val_set)?;

    let registry = params.registry()?;
    let mut adam = AdamState::new(&registry, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut report = TrainReport::default();
    let mut best_snapshot: Option<Vec<Vec<f64>>> = None;
    let mut epochs_since_best = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for e in 0..config.epochs {
        let epoch = config.start_epoch + e + 1;
        let started = Instant::now();
        order.shuffle(&mut rng);

        let mut loss_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            registry.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let tape = Tape::new();
                let loss =
                    example_loss_op(&tape, params, &train_set[idx], config.smoothing, &mut rng)?;
                let loss_value = loss.item()?;
                if !loss_value.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss on example {} at epoch {epoch}",
                        train_set[idx].id
                    )));
                }
                loss_total += loss_value;
                let scaled = tape.scale(&loss, scale)?;
                tape.backward(&scaled)?;
            }
            adam.step(&registry)?;
        }
        let train_loss = loss_total / train_set.len() as f64;

        let validation = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(params, val_set)?)
        };

        if let Some(val) = &validation {
            if let Some((value, higher_better)) = primary_metric(params.config.task, val) {
                let improved = match report.best_metric {
                    None => true,
                    Some(best) => {
                        if higher_better {
                            value > best
                        } else {
                            value < best
                        }
                    }
                };
                if improved {
                    report.best_metric = Some(value);
                    report.best_epoch = Some(epoch);
                    best_snapshot = Some(registry.snapshot());
                    epochs_since_best = 0;
                } else {
                    epochs_since_best += 1;
                }
            }
        }

        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation,
            seconds: started.elapsed().as_secs_f64(),
        });

        if let Some(patience) = config.patience {
            if !val_set.is_empty() && epochs_since_best >= patience {
                report.stopped_early = true;
                break;
            }
        }
    }

    if let Some(snapshot) = best_snapshot {
        registry.restore(&snapshot)?;
    }
    Ok(report)
}
