//! `rmfn ablate`: train the full model, both ablations, and a range of
//! stage counts over several seeds, then print one comparison table.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use rmfn_core::data::MultimodalExample;
use rmfn_core::model::{build_variant, ModelConfig, Task, Variant};
use rmfn_core::train::{evaluate, train, AdamConfig, TrainConfig};
use rmfn_core::{Error, Result};

use crate::config::{pick, write_resolved, IniFile};

#[derive(Args)]
pub struct AblateArgs {
    /// INI config file; keys read from the [ablate] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding train.tsv, val.tsv, test.tsv.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Directory receiving ablate.txt and ablate.resolved.ini.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Number of seeds per configuration.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Stage counts 1..=kmax are swept.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Stage count used by the variant comparison rows.
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
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
    pub dropout: Option<f64>,
    /// regression | classification:<c>.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub smoothing: Option<f64>,
}

struct Resolved {
    data_dir: PathBuf,
    out_dir: PathBuf,
    seeds: usize,
    kmax: usize,
    stages: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    h_l: usize,
    h_v: usize,
    h_a: usize,
    d_hl: usize,
    d_f: usize,
    d_z: usize,
    dropout: f64,
    task: Task,
    smoothing: f64,
}

fn resolve(args: &AblateArgs) -> Result<Resolved> {
    let ini = match &args.config {
        Some(path) => IniFile::load(path)?,
        None => IniFile::default(),
    };
    let sec = ini.section("ablate");
    Ok(Resolved {
        data_dir: args
            .data_dir
            .clone()
            .or_else(|| sec.raw("data_dir").map(PathBuf::from))
            .ok_or_else(|| Error::Config("ablate needs --data-dir".into()))?,
        out_dir: args
            .out_dir
            .clone()
            .or_else(|| sec.raw("out_dir").map(PathBuf::from))
            .ok_or_else(|| Error::Config("ablate needs --out-dir".into()))?,
        seeds: pick(args.seeds, sec.get("seeds")?, 3),
        kmax: pick(args.kmax, sec.get("kmax")?, 6),
        stages: pick(args.stages, sec.get("stages")?, 3),
        epochs: pick(args.epochs, sec.get("epochs")?, 10),
        batch_size: pick(args.batch_size, sec.get("batch_size")?, 16),
        lr: pick(args.lr, sec.get("lr")?, 1e-3),
        h_l: pick(args.h_l, sec.get("h_l")?, 6),
        h_v: pick(args.h_v, sec.get("h_v")?, 6),
        h_a: pick(args.h_a, sec.get("h_a")?, 6),
        d_hl: pick(args.d_hl, sec.get("d_hl")?, 6),
        d_f: pick(args.d_f, sec.get("d_f")?, 6),
        d_z: pick(args.d_z, sec.get("d_z")?, 6),
        dropout: pick(args.dropout, sec.get("dropout")?, 0.0),
        task: Task::parse(&pick(
            args.task.clone(),
            sec.raw("task").map(String::from),
            "regression".into(),
        ))?,
        smoothing: pick(args.smoothing, sec.get("smoothing")?, 0.1),
    })
}

fn mean_metrics(
    cfg: &Resolved,
    dims: (usize, usize, usize),
    variant: Variant,
    stages: usize,
    train_set: &[MultimodalExample],
    val_set: &[MultimodalExample],
    test_set: &[MultimodalExample],
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for seed in 1..=cfg.seeds as u64 {
        let model_cfg = ModelConfig {
            d_l: dims.0,
            d_v: dims.1,
            d_a: dims.2,
            h_l: cfg.h_l,
            h_v: cfg.h_v,
            h_a: cfg.h_a,
            d_hl: cfg.d_hl,
            d_f: cfg.d_f,
            d_z: cfg.d_z,
            stages,
            variant,
            task: cfg.task,
            dropout: cfg.dropout,
            seed,
        };
        let params = build_variant(&model_cfg)?;
        train(
            &params,
            train_set,
            val_set,
            &TrainConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                adam: AdamConfig {
                    lr: cfg.lr,
                    ..AdamConfig::default()
                },
                seed,
                patience: None,
                smoothing: cfg.smoothing,
                start_epoch: 0,
            },
        )?;
        let result = evaluate(&params, test_set)?;
        for (name, value) in result.metrics {
            *sums.entry(name).or_insert(0.0) += value;
        }
    }
    for value in sums.values_mut() {
        *value /= cfg.seeds as f64;
    }
    Ok(sums)
}

fn format_table(rows: &[(String, BTreeMap<String, f64>)]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for (_, metrics) in rows {
        for name in metrics.keys() {
            if !columns.contains(name) {
                columns.push(name.clone());
            }
        }
    }
    columns.sort();
    let label_width = rows
        .iter()
        .map(|(label, _)| label.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = format!("{:label_width$}", "model");
    for c in &columns {
        out.push_str(&format!("  {c:>8}"));
    }
    out.push('\n');
    for (label, metrics) in rows {
        out.push_str(&format!("{label:label_width$}"));
        for c in &columns {
            match metrics.get(c) {
                Some(v) => out.push_str(&format!("  {v:>8.4}")),
                None => out.push_str(&format!("  {:>8}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

pub fn run(args: AblateArgs) -> Result<()> {
    let cfg = resolve(&args)?;
    let train_set = super::load_split(&cfg.data_dir, "train.tsv")?;
    let val_set = super::load_split(&cfg.data_dir, "val.tsv")?;
    let test_set = super::load_split(&cfg.data_dir, "test.tsv")?;
    let dims = super::infer_dims(&train_set)?;

    let mut variant_rows = Vec::new();
    for variant in [Variant::Full, Variant::NoMfp, Variant::NoHighlight] {
        let label = if variant == Variant::Full {
            format!("full(K={})", cfg.stages)
        } else {
            variant.name().to_string()
        };
        eprintln!("ablate: running {label} over {} seeds", cfg.seeds);
        let metrics = mean_metrics(
            &cfg,
            dims,
            variant,
            cfg.stages,
            &train_set,
            &val_set,
            &test_set,
        )?;
        variant_rows.push((label, metrics));
    }

    let mut stage_rows = Vec::new();
    for k in 1..=cfg.kmax {
        eprintln!("ablate: running K={k} over {} seeds", cfg.seeds);
        let metrics = mean_metrics(
            &cfg,
            dims,
            Variant::Full,
            k,
            &train_set,
            &val_set,
            &test_set,
        )?;
        stage_rows.push((format!("K={k}"), metrics));
    }

    let mut text = format!(
        "test-split means over {} seeds ({} epochs per run)\n\nvariants:\n{}\nstage counts:\n{}",
        cfg.seeds,
        cfg.epochs,
        format_table(&variant_rows),
        format_table(&stage_rows),
    );
    text.push('\n');
    print!("{text}");

    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("ablate.txt"), &text)?;
    write_resolved(
        &cfg.out_dir.join("ablate.resolved.ini"),
        "ablate",
        &[
            ("data_dir", cfg.data_dir.display().to_string()),
            ("out_dir", cfg.out_dir.display().to_string()),
            ("seeds", cfg.seeds.to_string()),
            ("kmax", cfg.kmax.to_string()),
            ("stages", cfg.stages.to_string()),
            ("epochs", cfg.epochs.to_string()),
            ("batch_size", cfg.batch_size.to_string()),
            ("lr", cfg.lr.to_string()),
            ("h_l", cfg.h_l.to_string()),
            ("h_v", cfg.h_v.to_string()),
            ("h_a", cfg.h_a.to_string()),
            ("d_hl", cfg.d_hl.to_string()),
            ("d_f", cfg.d_f.to_string()),
            ("d_z", cfg.d_z.to_string()),
            ("dropout", cfg.dropout.to_string()),
            ("task", cfg.task.name()),
            ("smoothing", cfg.smoothing.to_string()),
        ],
    )?;
    Ok(())
}
