//! `dstkit` command line.

mod commands;
mod config;
mod error;
mod workdir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use config::KindArg;

#[derive(Debug, Parser)]
#[command(name = "dstkit", version, about = "Dialogue state tracking toolkit")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Work directory; overrides `paths.work_dir`.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    Valid,
    Test,
}

impl EvalSplit {
    pub fn name(self) -> &'static str {
        match self {
            EvalSplit::Valid => "valid",
            EvalSplit::Test => "test",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a MultiWOZ directory into canonical turn records.
    Ingest {
        /// Corpus root; overrides `paths.corpus`.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Fill per-turn labels from consecutive belief states.
    DeriveLabels,
    /// Sample the labeled part of the training pool.
    Split {
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write estimator training and validation files.
    SynthNegatives {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label the unlabeled pool with the teacher.
    PseudoLabel {
        #[arg(long, value_enum)]
        backend: Option<KindArg>,
    },
    /// Score and threshold a pseudo-label ledger.
    Filter {
        #[arg(long)]
        threshold: Option<f64>,
        /// Ledger to filter; defaults to the pseudo-label output.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<KindArg>,
    },
    /// Run the self-training loop, resuming if a state file exists.
    Selftrain,
    /// Write slot-model training records and train them if a trainer is set.
    TrainSlots,
    /// Predict value sets and belief states.
    Predict {
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
        #[arg(long, value_enum)]
        backend: Option<KindArg>,
    },
    /// Score predictions, predicting first unless a file is given.
    Evaluate {
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<KindArg>,
    },
    /// Print the effective configuration as TOML.
    DumpConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus in MultiWOZ layout.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        dialogues: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of dialogues in each of the validation and test lists.
        #[arg(long, default_value_t = 0.1)]
        eval_share: f64,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("DSTKIT_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match commands::run(cli.config.as_deref(), cli.work_dir.as_deref(), cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
