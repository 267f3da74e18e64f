//! `rmfn` command line: dataset generation, training, evaluation, ablation
//! comparison, gradient checking, and attention-trace export.
//!
//! Exit codes: 0 success, 1 usage, 2 validation/configuration, 3 numerical
//! failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rmfn",
    version,
    about = "Recurrent multistage fusion workflows: generate data, train, evaluate, ablate, trace attention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cross-modal datasets (train/val/test splits).
    Gen(commands::gen::GenArgs),
    /// Train a model variant on a generated dataset.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on a dataset file.
    Eval(commands::eval::EvalArgs),
    /// Export per-stage attention weights to CSV.
    Trace(commands::trace::TraceArgs),
    /// Verify analytic gradients against central differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Compare variants and stage counts in one table.
    Ablate(commands::ablate::AblateArgs),
}

fn exit_code_for(err: &rmfn_core::Error) -> u8 {
    match err {
        rmfn_core::Error::Numerical(_) => 3,
        rmfn_core::Error::Context { source, .. } => exit_code_for(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let usage_ok = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Trace(args) => commands::trace::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
