//! `rmfn trace`: per-stage attention weights as CSV for external plotting.
//!
//! Rows are `example_id,t,stage,feature_index,modality,weight` with `t` and
//! `stage` 1-based and `feature_index` indexing the concatenated hidden
//! vector; `modality` names the block the index falls in.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use rmfn_core::data::load_dataset;
use rmfn_core::model::{load_checkpoint, Mode, Variant};
use rmfn_core::numcore::Tape;
use rmfn_core::{Error, Result};

#[derive(Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated example ids to trace (default: the whole file).
    #[arg(long)]
    pub ids: Option<String>,
    /// Trace only the first N examples.
    #[arg(long)]
    pub limit: Option<usize>,
}

pub fn run(args: TraceArgs) -> Result<()> {
    let (params, _) = load_checkpoint(&args.checkpoint)?;
    if params.config.variant != Variant::Full {
        return Err(Error::Validation(format!(
            "variant {} has no attention weights to trace",
            params.config.variant.name()
        )));
    }
    let examples = load_dataset(&args.data)?;
    let selected: Vec<_> = match &args.ids {
        Some(ids) => {
            let wanted: Vec<&str> = ids.split(',').map(str::trim).collect();
            let mut picked = Vec::new();
            for id in wanted {
                let ex = examples
                    .iter()
                    .find(|e| e.id == id)
                    .ok_or_else(|| Error::Validation(format!("unknown example id '{id}'")))?;
                picked.push(ex.clone());
            }
            picked
        }
        None => {
            let limit = args.limit.unwrap_or(examples.len());
            examples.into_iter().take(limit).collect()
        }
    };
    if selected.is_empty() {
        return Err(Error::Validation("no examples selected to trace".into()));
    }

    let cfg = &params.config;
    let blocks = [
        (cfg.h_l, "l"),
        (cfg.h_v, "v"),
        (cfg.h_a, "a"),
    ];
    let modality_of = |index: usize| -> &'static str {
        let mut offset = 0;
        for (width, tag) in blocks {
            if index < offset + width {
                return tag;
            }
            offset += width;
        }
        unreachable!("index within feature_dim")
    };

    let mut out = BufWriter::new(File::create(&args.out)?);
    writeln!(out, "example_id,t,stage,feature_index,modality,weight")?;
    let mut rows = 0usize;
    for ex in &selected {
        let tape = Tape::new();
        let fwd = params.forward(&tape, ex, Mode::Eval, true)?;
        let traces = fwd
            .traces
            .ok_or_else(|| Error::Contract("forward returned no traces".into()))?;
        for (t, trace) in traces.iter().enumerate() {
            for (k, attention) in trace.attention.iter().enumerate() {
                for (j, weight) in attention.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        ex.id,
                        t + 1,
                        k + 1,
                        j,
                        modality_of(j),
                        weight
                    )?;
                    rows += 1;
                }
            }
        }
    }
    out.flush()?;
    println!(
        "wrote {rows} attention rows for {} examples to {}",
        selected.len(),
        args.out.display()
    );
    Ok(())
}
