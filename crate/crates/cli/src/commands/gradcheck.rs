//! `rmfn gradcheck`: finite-difference verification on a micro model.

use std::path::PathBuf;

use clap::Args;
use rmfn_core::data::{gen_synthetic, GeneratorConfig, Interaction};
use rmfn_core::model::{build_variant, ModelConfig, Task, Variant};
use rmfn_core::train::{grad_check, DEFAULT_FD_STEP};
use rmfn_core::{Error, Result};

use crate::config::{pick, IniFile};

/// Central differences scale quadratically in parameter count; past this the
/// command stops being an interactive check.
const MAX_PARAMS: usize = 2000;

#[derive(Args)]
pub struct GradcheckArgs {
    /// INI config file; keys read from the [gradcheck] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d_l: Option<usize>,
    #[arg(long)]
    pub d_v: Option<usize>,
    #[arg(long)]
    pub d_a: Option<usize>,
    #[arg(long)]
    pub h_l: Option<usize>,
    #[arg(long)]
    pub h_v: Option<usize>,
    #[arg(long)]
    pub h_a: Option<usize>,
    #[arg(long)]
    pub d_hl: Option<usize>,
    #[arg(long)]
    pub d_f: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// full | no_mfp | no_highlight.
    #[arg(long)]
    pub variant: Option<String>,
    /// regression | classification:<c>.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Central-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn run(args: GradcheckArgs) -> Result<()> {
    let ini = match &args.config {
        Some(path) => IniFile::load(path)?,
        None => IniFile::default(),
    };
    let sec = ini.section("gradcheck");
    let config = ModelConfig {
        d_l: pick(args.d_l, sec.get("d_l")?, 2),
        d_v: pick(args.d_v, sec.get("d_v")?, 2),
        d_a: pick(args.d_a, sec.get("d_a")?, 2),
        h_l: pick(args.h_l, sec.get("h_l")?, 3),
        h_v: pick(args.h_v, sec.get("h_v")?, 3),
        h_a: pick(args.h_a, sec.get("h_a")?, 3),
        d_hl: pick(args.d_hl, sec.get("d_hl")?, 4),
        d_f: pick(args.d_f, sec.get("d_f")?, 4),
        d_z: pick(args.d_z, sec.get("d_z")?, 3),
        stages: pick(args.stages, sec.get("stages")?, 2),
        variant: Variant::parse(&pick(
            args.variant.clone(),
            sec.raw("variant").map(String::from),
            "full".into(),
        ))?,
        task: Task::parse(&pick(
            args.task.clone(),
            sec.raw("task").map(String::from),
            "regression".into(),
        ))?,
        dropout: 0.0,
        seed: pick(args.seed, sec.get("seed")?, 0),
    };
    let seq_len = pick(args.seq_len, sec.get("seq_len")?, 3);
    let step = pick(args.step, sec.get("step")?, DEFAULT_FD_STEP);
    let tolerance = pick(args.tolerance, sec.get("tolerance")?, 1e-4);

    let params = build_variant(&config)?;
    let registry = params.registry()?;
    if registry.total_values() > MAX_PARAMS {
        return Err(Error::Config(format!(
            "{} parameters exceed the gradcheck budget of {MAX_PARAMS}; shrink the dims",
            registry.total_values()
        )));
    }
    println!(
        "checking {} tensors ({} values), step {step:.1e}, tolerance {tolerance:.1e}",
        registry.len(),
        registry.total_values()
    );

    let example = gen_synthetic(&GeneratorConfig {
        n_examples: 1,
        seq_len,
        d_l: config.d_l,
        d_v: config.d_v,
        d_a: config.d_a,
        task: super::gen_task_of(config.task)?,
        interaction: Interaction::Synchronized,
        noise_sigma: 0.0,
        seed: config.seed.wrapping_add(1),
    })?
    .remove(0);

    let report = grad_check(&params, &example, step, tolerance)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let failures: Vec<String> = report
            .failures()
            .iter()
            .map(|t| format!("{} ({:.3e})", t.name, t.max_rel_err))
            .collect();
        Err(Error::Numerical(format!(
            "gradient check failed for {}",
            failures.join(", ")
        )))
    }
}
