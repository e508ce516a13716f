//! `rom-cli`: dataset generation, training, prediction, evaluation,
//! uncertainty maps and the end-to-end study.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure, 4 IO error.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pgp_core::{Error, Result};

use crate::commands::Run;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "rom-cli", version, about = "POD basis prediction on the Grassmann manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to runs/<command>-<config hash>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Existing dataset directory.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Model archive directory.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// CSV of query parameters.
    #[arg(long, global = true)]
    thetas: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate the training and test grids into a dataset directory.
    Simulate,
    /// Fit a pGP model and write its archive.
    Train,
    /// Predict bases at the parameters of a CSV file.
    Predict,
    /// Compare pGP, interpolation and global POD on the test split.
    Evaluate,
    /// Sampling-based uncertainty of a trained model over a grid.
    Uq,
    /// Simulate, fit with a regularization sweep, evaluate and map uncertainty.
    Study,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Uq => "uq",
            Command::Study => "study",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    // Flags win over file values.
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.threads = cli.threads.or(cfg.threads);
    cfg.out = cli.out.or(cfg.out);
    cfg.dataset = cli.dataset.or(cfg.dataset);
    cfg.model = cli.model.or(cfg.model);
    cfg.thetas = cli.thetas.or(cfg.thetas);
    let cfg = cfg.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let command = cli.command.name();
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{command}-{}", &cfg.hash(command)[..12])));
    Run { command, cfg, out }.execute()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rom-cli: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::SchemaMismatch("x".into())), 2);
        assert_eq!(exit_code(&Error::SingularAlignment { condition: f64::INFINITY }), 3);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 4);
    }
}
