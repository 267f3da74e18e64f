//! `rmfn eval`: metrics for a checkpoint on one dataset file.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rmfn_core::data::load_dataset;
use rmfn_core::model::load_checkpoint;
use rmfn_core::train::evaluate;
use rmfn_core::{Error, Result};

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file (one of the gen splits).
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics log destination; defaults to `<checkpoint>.eval.log`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let (params, epoch) = load_checkpoint(&args.checkpoint)?;
    let examples = load_dataset(&args.data)?;
    if examples.is_empty() {
        return Err(Error::Validation(format!(
            "{} holds no examples",
            args.data.display()
        )));
    }
    let result = evaluate(&params, &examples)
        .map_err(|e| e.in_context(format!("evaluating {}", args.data.display())))?;

    let mut lines = format!(
        "checkpoint\t{}\nepoch\t{epoch}\ndata\t{}\nexamples\t{}\n",
        args.checkpoint.display(),
        args.data.display(),
        result.count
    );
    for (name, value) in &result.metrics {
        lines.push_str(&format!("{name}\t{value:.6}\n"));
    }
    print!("{lines}");

    let log_path = args
        .log
        .unwrap_or_else(|| args.checkpoint.with_extension("ckpt.eval.log"));
    fs::write(&log_path, lines)?;
    Ok(())
}
