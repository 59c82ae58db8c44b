//! The `nsai` command line.
//!
//! Every flag can also be set through an `NSAI_*` environment variable, and
//! every command accepts `--config` with a TOML or JSON settings file or a
//! manifest written by an earlier run. Flags win over the file, the file wins
//! over defaults. Commands that write files also write `manifest.json` with
//! the resolved settings and SHA-256 digests of inputs and outputs; passing
//! it back through `--config` repeats the run.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use commands::ModelFile;
pub use manifest::{digest_file, RunManifest};

/// Failure of a command, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or settings (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while running (exit 1).
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub(crate) fn rt<E: Into<crate::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

#[derive(Debug, Parser)]
#[command(name = "nsai", version, about = "Knowledge-based neural networks for learner modelling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test pair with a planted spurious feature.
    Synth(SynthArgs),
    /// Train a baseline or knowledge-compiled classifier.
    Train(TrainArgs),
    /// Accuracy, recall, precision and confusion matrix on labelled data.
    Evaluate(EvaluateArgs),
    /// Global and per-misprediction LIME explanations.
    Explain(ExplainArgs),
    /// Weighted threshold rules from a knowledge-compiled model.
    Extract(ExtractArgs),
    /// Train and compare Deep NN, Deep NN-SMOTE, Deep NN-Autoencoder and NSAI.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Settings file (TOML, JSON, or a manifest.json from an earlier run).
    #[arg(long, env = "NSAI_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "NSAI_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training rows.
    #[arg(long, env = "NSAI_ROWS", value_parser = clap::value_parser!(u64).range(1..))]
    pub rows: Option<u64>,
    /// Test rows.
    #[arg(long, env = "NSAI_TEST_ROWS", value_parser = clap::value_parser!(u64).range(1..))]
    pub test_rows: Option<u64>,
    #[arg(long, env = "NSAI_SEED")]
    pub seed: Option<u64>,
    /// Target correlation of the spurious feature in the training set.
    #[arg(long, env = "NSAI_TRAIN_R")]
    pub train_r: Option<f64>,
    /// Target correlation of the spurious feature in the test set.
    #[arg(long, env = "NSAI_TEST_R")]
    pub test_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Baseline,
    Nsai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentChoice {
    #[default]
    None,
    Smote,
    Autoencoder,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training CSV.
    #[arg(long, env = "NSAI_DATA")]
    pub data: Option<String>,
    /// Rule file; implies `--model nsai`.
    #[arg(long, env = "NSAI_RULES")]
    pub rules: Option<String>,
    #[arg(long, env = "NSAI_MODEL", value_enum)]
    pub model: Option<ModelChoice>,
    #[arg(long, env = "NSAI_AUGMENT", value_enum)]
    pub augment: Option<AugmentChoice>,
    #[arg(long, env = "NSAI_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model file written by `train`.
    #[arg(long = "model", env = "NSAI_MODEL_FILE")]
    pub model: Option<String>,
    #[arg(long, env = "NSAI_DATA")]
    pub data: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "model", env = "NSAI_MODEL_FILE")]
    pub model: Option<String>,
    #[arg(long, env = "NSAI_DATA")]
    pub data: Option<String>,
    /// Perturbations per explained row.
    #[arg(long, env = "NSAI_SAMPLES")]
    pub samples: Option<usize>,
    #[arg(long, env = "NSAI_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "model", env = "NSAI_MODEL_FILE")]
    pub model: Option<String>,
    /// Training CSV used to measure fidelity.
    #[arg(long, env = "NSAI_DATA")]
    pub data: Option<String>,
    /// Relative spread for grouping weights into one term.
    #[arg(long, env = "NSAI_TOLERANCE")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, env = "NSAI_TRAIN")]
    pub train: Option<String>,
    #[arg(long, env = "NSAI_TEST")]
    pub test: Option<String>,
    #[arg(long, env = "NSAI_RULES")]
    pub rules: Option<String>,
    #[arg(long, env = "NSAI_SEED")]
    pub seed: Option<u64>,
    /// Cross-validation folds (0 skips).
    #[arg(long, env = "NSAI_FOLDS")]
    pub folds: Option<usize>,
    /// Permutation repeats for spurious-feature importance.
    #[arg(long, env = "NSAI_REPEATS")]
    pub repeats: Option<usize>,
}

/// Runs a parsed command, writing human-readable output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a, stdout),
        Command::Train(a) => commands::train(a, stdout),
        Command::Evaluate(a) => commands::evaluate(a, stdout),
        Command::Explain(a) => commands::explain(a, stdout),
        Command::Extract(a) => commands::extract(a, stdout),
        Command::Compare(a) => commands::compare(a, stdout),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut out = std::io::stdout().lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
