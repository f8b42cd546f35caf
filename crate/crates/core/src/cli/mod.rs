//! Command-line front end: config files, subcommands and artifact layout.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{load_data, run, LoadedData};
pub use config::{CsvSource, DataSource, EvalConfig, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "cdanet", version, about = "Cross-domain CTR training, evaluation and analysis")]
pub struct Cli {
    /// Experiment config file (sectioned key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for ablation and sweep cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Translation,
    Augmentation,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Translation,
    Augmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Sparsity,
    Hyper,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark as CSV files.
    GenData,
    /// Train both stages (or one of them, or a baseline).
    Train {
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        /// Starting checkpoint for `--stage augmentation`.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Train a baseline instead: mlp, sharebottom, mmoe or ple.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Score a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Prediction path; defaults to the checkpoint's own stage.
        #[arg(long, value_enum)]
        stage: Option<PathArg>,
    },
    /// Nearest-neighbor analysis of translated target features.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Correspondence CSV; synthetic data supplies its own.
        #[arg(long)]
        correspondence: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Train every variant of the ablation plan for every seed.
    Ablate,
    /// Sparsity or loss-weight sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
    },
}
