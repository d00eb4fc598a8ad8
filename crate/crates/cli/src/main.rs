//! Pipeline front end. Every subcommand reads an optional TOML run
//! configuration, applies flag overrides on top, and writes the resolved
//! configuration into its output directory so runs are reproducible from
//! artifacts alone.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

mod config;
mod cv;
mod data;
mod evaluate;
mod import;
mod infer;
mod post;
mod preprocess;
mod sweep;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// Failure while doing the work; exit code 1.
    Runtime(String),
}

impl From<apnea_core::Error> for CliError {
    fn from(e: apnea_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "apnea-pipeline",
    version,
    about = "Sleep apnea event detection from ECG and SpO2 recordings"
)]
struct Cli {
    /// TOML run configuration; explicit flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Base RNG seed for splits, parameter init, and training order.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap; 0 keeps the default pool. Overrides the
    /// APNEA_PIPELINE_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a minute-labeled ECG text export into native channel files.
    Import(import::Args),
    /// Generate a synthetic cohort with known events.
    Synth(synth::Args),
    /// Filter recordings and cache model-ready context windows.
    Preprocess(preprocess::Args),
    /// Train a detector on preprocessed windows.
    Train(train::Args),
    /// Score one recording with a trained detector.
    Infer(infer::Args),
    /// Score preprocessed patients and report per-patient and pooled metrics.
    Evaluate(evaluate::Args),
    /// Leave-one-patient-out cross-validation over a dataset directory.
    Cv(cv::Args),
    /// Detection quality as a function of training-set size.
    Sweep(sweep::Args),
}

fn resolve_threads(flag: Option<usize>, cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("APNEA_PIPELINE_THREADS") {
        Ok(s) => s.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "APNEA_PIPELINE_THREADS must be a non-negative integer, got {s:?}"
            ))
        }),
        Err(_) => Ok(cfg.threads),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let threads = resolve_threads(cli.threads, &cfg)?;
    apnea_core::exec::configure_thread_cap(threads);

    match cli.command {
        Command::Import(args) => import::run(args, cfg),
        Command::Synth(args) => synth::run(args, cfg),
        Command::Preprocess(args) => preprocess::run(args, cfg),
        Command::Train(args) => train::run(args, cfg),
        Command::Infer(args) => infer::run(args, cfg),
        Command::Evaluate(args) => evaluate::run(args, cfg),
        Command::Cv(args) => cv::run(args, cfg),
        Command::Sweep(args) => sweep::run(args, cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
