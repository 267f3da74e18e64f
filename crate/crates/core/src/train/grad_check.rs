//! Finite-difference verification of the analytic gradients.
//!
//! Central differences on the raw parameter data give an oracle that never
//! touches the tape's backward pass, so the two routes are independent.

use std::fmt;

use crate::data::MultimodalExample;
use crate::error::Result;
use crate::model::{Mode, ModelParams, Task};
use crate::numcore::{Tape, Tensor};
use crate::train::loss::{loss_classification, loss_regression, soft_targets};

/// Default central-difference step for whole-model checks. Some attention
/// parameters carry gradients below 1e-8 on micro models; at step 1e-5 the
/// f64 rounding noise of the loss (~1e-16/step) overwhelms them, while steps
/// past ~1e-3 start to show truncation error. 3e-4 clears both regimes with
/// an order of magnitude to spare.
pub const DEFAULT_FD_STEP: f64 = 3e-4;

/// Worst relative error observed inside one parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }

    /// Tensors that individually exceed the tolerance.
    pub fn failures(&self) -> Vec<&TensorCheck> {
        self.tensors
            .iter()
            .filter(|t| t.max_rel_err >= self.tolerance)
            .collect()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .tensors
            .iter()
            .map(|t| t.name.len())
            .max()
            .unwrap_or(6)
            .max(6);
        writeln!(f, "{:width$}  max rel err  status", "tensor")?;
        for t in &self.tensors {
            let status = if t.max_rel_err < self.tolerance {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(f, "{:width$}  {:>11.3e}  {status}", t.name, t.max_rel_err)?;
        }
        write!(
            f,
            "overall max {:.3e} vs tolerance {:.1e}: {}",
            self.max_rel_err(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Task loss of one eval-mode forward pass (dropout bypassed, so the loss is
/// a deterministic function of the parameters).
pub fn example_loss(params: &ModelParams, example: &MultimodalExample) -> Result<f64> {
    let tape = Tape::new();
    let out = params.forward(&tape, example, Mode::Eval, false)?;
    let loss = match params.config.task {
        Task::Regression => {
            loss_regression(&tape, &out.prediction, example.label.as_real()?)?
        }
        Task::Classification { classes } => {
            let target = soft_targets(example.label.as_class()?, classes, 0.0)?;
            loss_classification(&tape, &out.prediction, &target)?
        }
    };
    loss.item()
}

/// Central-difference gradient of `loss_fn` with respect to one tensor's raw
/// data, probing each coordinate in place.
pub fn numerical_gradient(
    param: &Tensor,
    mut loss_fn: impl FnMut() -> Result<f64>,
    step: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; param.len()];
    for i in 0..param.len() {
        let orig = param.get(i);
        param.set(i, orig + step);
        let up = loss_fn()?;
        param.set(i, orig - step);
        let down = loss_fn()?;
        param.set(i, orig);
        grad[i] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare supplied analytic gradients against central differences.
pub(crate) fn compare_with_numeric(
    params: &ModelParams,
    example: &MultimodalExample,
    step: f64,
    tolerance: f64,
    analytic: &[(String, Vec<f64>)],
) -> Result<GradCheckReport> {
    let registry = params.registry()?;
    let mut tensors = Vec::with_capacity(analytic.len());
    for (name, grad) in analytic {
        let tensor = registry.get(name).ok_or_else(|| {
            crate::error::Error::Contract(format!("unknown parameter '{name}'"))
        })?;
        let numeric = numerical_gradient(tensor, || example_loss(params, example), step)?;
        let mut check = TensorCheck {
            name: name.clone(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic_at_worst: 0.0,
            numeric_at_worst: 0.0,
        };
        for (i, (&a, &n)) in grad.iter().zip(&numeric).enumerate() {
            let rel = relative_error(a, n);
            if rel > check.max_rel_err {
                check.max_rel_err = rel;
                check.worst_index = i;
                check.analytic_at_worst = a;
                check.numeric_at_worst = n;
            }
        }
        tensors.push(check);
    }
    Ok(GradCheckReport { tensors, tolerance })
}

/// Full gradient check: compute analytic gradients via one backward pass,
/// then compare every parameter tensor against central differences.
pub fn grad_check(
    params: &ModelParams,
    example: &MultimodalExample,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let registry = params.registry()?;
    registry.zero_grads();
    let tape = Tape::new();
    let out = params.forward(&tape, example, Mode::Eval, false)?;
    let loss = match params.config.task {
        Task::Regression => {
            loss_regression(&tape, &out.prediction, example.label.as_real()?)?
        }
        Task::Classification { classes } => {
            let target = soft_targets(example.label.as_class()?, classes, 0.0)?;
            loss_classification(&tape, &out.prediction, &target)?
        }
    };
    tape.backward(&loss)?;
    let analytic: Vec<(String, Vec<f64>)> = registry
        .iter()
        .map(|(n, t)| (n.clone(), t.grad().expect("registered parameters carry grads")))
        .collect();
    registry.zero_grads();
    compare_with_numeric(params, example, step, tolerance, &analytic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, GenTask, GeneratorConfig, Interaction};
    use crate::model::{build_variant, ModelConfig, Variant};

    fn micro(variant: Variant, task: Task) -> (ModelParams, MultimodalExample) {
        let config = ModelConfig {
            d_l: 2,
            d_v: 2,
            d_a: 2,
            h_l: 2,
            h_v: 2,
            h_a: 2,
            d_hl: 3,
            d_f: 3,
            d_z: 2,
            stages: 2,
            variant,
            task,
            dropout: 0.0,
            seed: 77,
        };
        let params = build_variant(&config).unwrap();
        let gen_task = match task {
            Task::Regression => GenTask::Regression,
            Task::Classification { .. } => GenTask::BinaryClassification,
        };
        let example = gen_synthetic(&GeneratorConfig {
            n_examples: 1,
            seq_len: 3,
            d_l: 2,
            d_v: 2,
            d_a: 2,
            task: gen_task,
            interaction: Interaction::Synchronized,
            noise_sigma: 0.0,
            seed: 3,
        })
        .unwrap()
        .remove(0);
        (params, example)
    }

    #[test]
    fn linear_head_gradient_is_nearly_exact() {
        // Zeroing everything but the head makes the loss affine in the head
        // weights (away from the kink), so central differences are exact to
        // rounding.
        let (params, example) = micro(Variant::NoMfp, Task::Regression);
        let registry = params.registry().unwrap();
        for (name, t) in registry.iter() {
            if !name.starts_with("head") {
                t.update_data(|v| *v = 0.0);
            }
        }
        params.head.b.set_data(vec![0.5]).unwrap();
        let report = grad_check(&params, &example, DEFAULT_FD_STEP, 1e-4).unwrap();
        assert!(report.passed());
        for t in &report.tensors {
            if t.name.starts_with("head") {
                assert!(t.max_rel_err < 1e-9, "{}: {}", t.name, t.max_rel_err);
            }
        }
    }

    #[test]
    fn micro_model_passes_end_to_end() {
        for variant in [Variant::Full, Variant::NoMfp, Variant::NoHighlight] {
            let (params, example) = micro(variant, Task::Regression);
            let report = grad_check(&params, &example, DEFAULT_FD_STEP, 1e-4).unwrap();
            assert!(
                report.passed(),
                "variant {:?} failed:\n{report}",
                variant
            );
        }
    }

    #[test]
    fn classification_loss_also_checks_out() {
        let (params, example) = micro(Variant::Full, Task::Classification { classes: 2 });
        let report = grad_check(&params, &example, DEFAULT_FD_STEP, 1e-4).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn corrupted_analytic_gradient_is_flagged_by_name() {
        let (params, example) = micro(Variant::Full, Task::Regression);
        let registry = params.registry().unwrap();
        registry.zero_grads();
        let tape = Tape::new();
        let out = params.forward(&tape, &example, Mode::Eval, false).unwrap();
        let loss = loss_regression(&tape, &out.prediction, example.label.as_real().unwrap())
            .unwrap();
        tape.backward(&loss).unwrap();
        let mut analytic: Vec<(String, Vec<f64>)> = registry
            .iter()
            .map(|(n, t)| (n.clone(), t.grad().unwrap()))
            .collect();
        registry.zero_grads();

        let victim = analytic
            .iter_mut()
            .find(|(n, _)| n == "mfp.summarize.w")
            .unwrap();
        victim.1[0] += 0.5;

        let report =
            compare_with_numeric(&params, &example, DEFAULT_FD_STEP, 1e-4, &analytic).unwrap();
        assert!(!report.passed());
        let failures = report.failures();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].name, "mfp.summarize.w");
    }
}
