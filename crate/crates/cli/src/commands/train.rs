//! `rmfn train`: build or resume a model variant and fit it.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rmfn_core::model::{
    build_variant, load_checkpoint, save_checkpoint, ModelConfig, ModelParams, Task, Variant,
};
use rmfn_core::train::{evaluate, train, AdamConfig, TrainConfig};
use rmfn_core::{Error, Result};

use crate::config::{pick, write_resolved, IniFile};

#[derive(Args)]
pub struct TrainArgs {
    /// INI config file; keys read from the [train] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding train.tsv (and optionally val.tsv).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Directory receiving model.ckpt, train.log, train.resolved.ini.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Continue from a checkpoint; its config wins over model keys.
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// full | no_mfp | no_highlight.
    #[arg(long)]
    pub variant: Option<String>,
    /// regression | classification:<c>.
    #[arg(long)]
    pub task: Option<String>,
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
    /// Fusion stage count K.
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub model_seed: Option<u64>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Early-stopping patience in epochs; 0 disables it.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Shuffle/dropout seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub struct ResolvedTrain {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub variant: Variant,
    pub task: Task,
    pub h_l: usize,
    pub h_v: usize,
    pub h_a: usize,
    pub d_hl: usize,
    pub d_f: usize,
    pub d_z: usize,
    pub stages: usize,
    pub dropout: f64,
    pub model_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub patience: usize,
    pub smoothing: f64,
    pub seed: u64,
}

pub fn resolve(args: &TrainArgs, section: &str) -> Result<ResolvedTrain> {
    let ini = match &args.config {
        Some(path) => IniFile::load(path)?,
        None => IniFile::default(),
    };
    let sec = ini.section(section);
    let data_dir = args
        .data_dir
        .clone()
        .or_else(|| sec.raw("data_dir").map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("{section} needs --data-dir")))?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| sec.raw("out_dir").map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("{section} needs --out-dir")))?;
    Ok(ResolvedTrain {
        data_dir,
        out_dir,
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
        h_l: pick(args.h_l, sec.get("h_l")?, 8),
        h_v: pick(args.h_v, sec.get("h_v")?, 8),
        h_a: pick(args.h_a, sec.get("h_a")?, 8),
        d_hl: pick(args.d_hl, sec.get("d_hl")?, 8),
        d_f: pick(args.d_f, sec.get("d_f")?, 8),
        d_z: pick(args.d_z, sec.get("d_z")?, 8),
        stages: pick(args.stages, sec.get("stages")?, 3),
        dropout: pick(args.dropout, sec.get("dropout")?, 0.2),
        model_seed: pick(args.model_seed, sec.get("model_seed")?, 0),
        epochs: pick(args.epochs, sec.get("epochs")?, 30),
        batch_size: pick(args.batch_size, sec.get("batch_size")?, 16),
        lr: pick(args.lr, sec.get("lr")?, 1e-3),
        beta1: pick(args.beta1, sec.get("beta1")?, 0.9),
        beta2: pick(args.beta2, sec.get("beta2")?, 0.999),
        epsilon: pick(args.epsilon, sec.get("epsilon")?, 1e-8),
        patience: pick(args.patience, sec.get("patience")?, 20),
        smoothing: pick(args.smoothing, sec.get("smoothing")?, 0.1),
        seed: pick(args.seed, sec.get("seed")?, 0),
    })
}

impl ResolvedTrain {
    pub fn model_config(&self, dims: (usize, usize, usize)) -> ModelConfig {
        ModelConfig {
            d_l: dims.0,
            d_v: dims.1,
            d_a: dims.2,
            h_l: self.h_l,
            h_v: self.h_v,
            h_a: self.h_a,
            d_hl: self.d_hl,
            d_f: self.d_f,
            d_z: self.d_z,
            stages: self.stages,
            variant: self.variant,
            task: self.task,
            dropout: self.dropout,
            seed: self.model_seed,
        }
    }

    pub fn train_config(&self, start_epoch: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            seed: self.seed,
            patience: (self.patience > 0).then_some(self.patience),
            smoothing: self.smoothing,
            start_epoch,
        }
    }

    pub fn resolved_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("data_dir", self.data_dir.display().to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("variant", self.variant.name().to_string()),
            ("task", self.task.name()),
            ("h_l", self.h_l.to_string()),
            ("h_v", self.h_v.to_string()),
            ("h_a", self.h_a.to_string()),
            ("d_hl", self.d_hl.to_string()),
            ("d_f", self.d_f.to_string()),
            ("d_z", self.d_z.to_string()),
            ("stages", self.stages.to_string()),
            ("dropout", self.dropout.to_string()),
            ("model_seed", self.model_seed.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("patience", self.patience.to_string()),
            ("smoothing", self.smoothing.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

pub fn run(args: TrainArgs) -> Result<()> {
    let resolved = resolve(&args, "train")?;
    let train_set = super::load_split(&resolved.data_dir, "train.tsv")?;
    let val_path = resolved.data_dir.join("val.tsv");
    let val_set = if val_path.exists() {
        rmfn_core::data::load_dataset(&val_path)?
    } else {
        Vec::new()
    };
    let dims = super::infer_dims(&train_set)?;

    let (params, start_epoch): (ModelParams, usize) = match &args.resume {
        Some(ckpt) => {
            let (params, epoch) = load_checkpoint(ckpt)?;
            let cfg = &params.config;
            if (cfg.d_l, cfg.d_v, cfg.d_a) != dims {
                return Err(Error::Validation(format!(
                    "checkpoint expects widths ({},{},{}), dataset has ({},{},{})",
                    cfg.d_l, cfg.d_v, cfg.d_a, dims.0, dims.1, dims.2
                )));
            }
            println!(
                "resuming {} checkpoint at epoch {epoch}",
                cfg.variant.name()
            );
            (params, epoch)
        }
        None => (build_variant(&resolved.model_config(dims))?, 0),
    };

    let registry = params.registry()?;
    println!(
        "variant {}: {} trainable values in {} tensors",
        params.config.variant.name(),
        registry.total_values(),
        registry.len()
    );

    let report = train(&params, &train_set, &val_set, &resolved.train_config(start_epoch))?;

    fs::create_dir_all(&resolved.out_dir)?;
    let ckpt_path = resolved.out_dir.join("model.ckpt");
    let final_epoch = start_epoch + report.epochs.len();
    save_checkpoint(&ckpt_path, &params, final_epoch)?;

    let mut log = Vec::new();
    report.write_log(&mut log)?;
    fs::write(resolved.out_dir.join("train.log"), &log)?;
    write_resolved(
        &resolved.out_dir.join("train.resolved.ini"),
        "train",
        &resolved.resolved_pairs(),
    )?;

    if let Some(last) = report.epochs.last() {
        println!(
            "epoch {} train_loss {:.6}{}",
            last.epoch,
            last.train_loss,
            last.validation
                .as_ref()
                .map(|v| format!(" val[{v}]"))
                .unwrap_or_default()
        );
    }
    if !val_set.is_empty() {
        let final_val = evaluate(&params, &val_set)?;
        println!("final validation: {final_val}");
    }
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}
