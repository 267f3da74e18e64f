//! `rmfn gen`: synthetic dataset generation with disjoint splits.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rmfn_core::data::{gen_synthetic, save_dataset, GeneratorConfig, Interaction};
use rmfn_core::model::Task;
use rmfn_core::{Error, Result};

use crate::config::{pick, write_resolved, IniFile};

#[derive(Args)]
pub struct GenArgs {
    /// INI config file; keys read from the [gen] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving train.tsv, val.tsv, test.tsv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Total example count before splitting.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub d_l: Option<usize>,
    #[arg(long)]
    pub d_v: Option<usize>,
    #[arg(long)]
    pub d_a: Option<usize>,
    /// synchronized | asynchronous | bimodal.
    #[arg(long)]
    pub interaction: Option<String>,
    /// regression | classification:2.
    #[arg(long)]
    pub task: Option<String>,
    /// Label noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    /// Overwrite existing split files.
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: GenArgs) -> Result<()> {
    let ini = match &args.config {
        Some(path) => IniFile::load(path)?,
        None => IniFile::default(),
    };
    let sec = ini.section("gen");

    let out_dir = args
        .out_dir
        .or_else(|| sec.raw("out_dir").map(PathBuf::from))
        .ok_or_else(|| Error::Config("gen needs --out-dir (or out_dir in [gen])".into()))?;
    let n = pick(args.n, sec.get("n")?, 1000);
    let seq_len = pick(args.seq_len, sec.get("seq_len")?, 8);
    let d_l = pick(args.d_l, sec.get("d_l")?, 3);
    let d_v = pick(args.d_v, sec.get("d_v")?, 3);
    let d_a = pick(args.d_a, sec.get("d_a")?, 3);
    let interaction = Interaction::parse(&pick(
        args.interaction,
        sec.raw("interaction").map(String::from),
        "synchronized".into(),
    ))?;
    let task = Task::parse(&pick(
        args.task,
        sec.raw("task").map(String::from),
        "regression".into(),
    ))?;
    let sigma = pick(args.sigma, sec.get("sigma")?, 0.1);
    let seed = pick(args.seed, sec.get("seed")?, 0);
    let train_frac = pick(args.train_frac, sec.get("train_frac")?, 0.70);
    let val_frac = pick(args.val_frac, sec.get("val_frac")?, 0.15);
    let test_frac = pick(args.test_frac, sec.get("test_frac")?, 0.15);

    let total = train_frac + val_frac + test_frac;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    if train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0 {
        return Err(Error::Config("split fractions must be non-negative".into()));
    }

    fs::create_dir_all(&out_dir)?;
    let paths = ["train.tsv", "val.tsv", "test.tsv"].map(|f| out_dir.join(f));
    if !args.force {
        for p in &paths {
            if p.exists() {
                return Err(Error::Validation(format!(
                    "{} already exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
    }

    let examples = gen_synthetic(&GeneratorConfig {
        n_examples: n,
        seq_len,
        d_l,
        d_v,
        d_a,
        task: super::gen_task_of(task)?,
        interaction,
        noise_sigma: sigma,
        seed,
    })?;
    let n_train = (train_frac * n as f64).floor() as usize;
    let n_val = (val_frac * n as f64).floor() as usize;
    let (train, rest) = examples.split_at(n_train);
    let (val, test) = rest.split_at(n_val.min(rest.len()));

    save_dataset(&paths[0], train)?;
    save_dataset(&paths[1], val)?;
    save_dataset(&paths[2], test)?;

    write_resolved(
        &out_dir.join("gen.resolved.ini"),
        "gen",
        &[
            ("out_dir", out_dir.display().to_string()),
            ("n", n.to_string()),
            ("seq_len", seq_len.to_string()),
            ("d_l", d_l.to_string()),
            ("d_v", d_v.to_string()),
            ("d_a", d_a.to_string()),
            ("interaction", interaction.name().to_string()),
            ("task", task.name()),
            ("sigma", sigma.to_string()),
            ("seed", seed.to_string()),
            ("train_frac", train_frac.to_string()),
            ("val_frac", val_frac.to_string()),
            ("test_frac", test_frac.to_string()),
        ],
    )?;
    println!(
        "wrote {} train / {} val / {} test examples to {}",
        train.len(),
        val.len(),
        test.len(),
        out_dir.display()
    );
    Ok(())
}
