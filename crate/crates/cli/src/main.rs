//! `sovm`: batch driver for the stochastic optimal-velocity model.
//!
//! Exit codes: 0 success, 1 a scientific check failed, 2 usage, config or
//! IO error.

mod commands;
mod config;
mod output;
mod validate;

use std::io;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sovm", version, about = "Stochastic optimal-velocity car-following simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the noise-free model and write trajectory.csv.
    Deterministic(CommonArgs),
    /// Simulate regularized noisy paths and their stopping times.
    Sde(CommonArgs),
    /// Monte Carlo collision study over an (epsilon, L) grid.
    Sweep(CommonArgs),
    /// Build and certify the barrier curve.
    Barrier(CommonArgs),
    /// Run the invariant checks and write validate.json.
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Existing directory for output files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo sweeps.
    #[arg(long)]
    pub threads: Option<NonZeroUsize>,
}

impl CommonArgs {
    pub fn threads(&self) -> usize {
        self.threads
            .or_else(|| std::thread::available_parallelism().ok())
            .map_or(1, NonZeroUsize::get)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: io::Error },
    Model(sovm_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<sovm_core::Error> for CliError {
    fn from(e: sovm_core::Error) -> Self {
        CliError::Model(e)
    }
}

/// Whether the scientific checks of a run held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Deterministic(a) => commands::deterministic(a),
        Command::Sde(a) => commands::sde(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Barrier(a) => commands::barrier(a),
        Command::Validate(a) => validate::run(a),
    };
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sovm: {e}");
            ExitCode::from(2)
        }
    }
}
