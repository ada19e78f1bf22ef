//! Command-line driver: configuration, output conventions and one entry
//! point per experiment.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical blow-up: {0}")]
    BlowUp(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::BlowUp(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<vortmix_core::Error> for CliError {
    fn from(e: vortmix_core::Error) -> Self {
        match e {
            vortmix_core::Error::NonFiniteState { .. } => CliError::BlowUp(e.to_string()),
            vortmix_core::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vortmix", version, about = "Stochastic 2D Navier-Stokes experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available processors).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    /// JSON run configuration (defaults apply when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Whitespace-separated class vector, overriding the configuration.
    #[arg(long)]
    pub kvector: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory.
    Simulate(CommonArgs),
    /// Two solutions under common noise.
    Couple(CommonArgs),
    /// Semigroup, contraction and reconstruction checks of the high-mode map.
    ReduceCheck(CommonArgs),
    /// Normalization and additivity of the low-mode log-densities.
    GirsanovCheck(CommonArgs),
    /// Unit-interval functionals and their probabilistic bounds.
    Diagnostics(CommonArgs),
    /// Small/large classification of a class vector.
    Partition(PartitionArgs),
    /// Stationary statistics and autocovariance decay.
    Mixing(CommonArgs),
}

/// Loads the configuration, applies command-line overrides and dispatches.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, kvector) = match &cli.command {
        Command::Simulate(a) => ("simulate", Some(a.clone()), None),
        Command::Couple(a) => ("couple", Some(a.clone()), None),
        Command::ReduceCheck(a) => ("reduce-check", Some(a.clone()), None),
        Command::GirsanovCheck(a) => ("girsanov-check", Some(a.clone()), None),
        Command::Diagnostics(a) => ("diagnostics", Some(a.clone()), None),
        Command::Mixing(a) => ("mixing", Some(a.clone()), None),
        Command::Partition(p) => (
            "partition",
            p.config.clone().map(|config| CommonArgs {
                config,
                seed: p.seed,
                out: p.out.clone(),
                workers: p.workers,
            }),
            Some(p.clone()),
        ),
    };
    let (mut cfg, seed, out, workers) = match (&common, &kvector) {
        (Some(a), _) => (RunConfig::load(&a.config)?, a.seed, a.out.clone(), a.workers),
        (None, Some(p)) => (RunConfig::default(), p.seed, p.out.clone(), p.workers),
        (None, None) => unreachable!("every subcommand carries arguments"),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let workers = match workers {
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let par = vortmix_core::parallel::Parallelism::with_workers(workers).map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    let ctx = commands::Context::new(cfg, name, par)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Couple(_) => commands::couple(&ctx),
        Command::ReduceCheck(_) => commands::reduce_check(&ctx),
        Command::GirsanovCheck(_) => commands::girsanov_check(&ctx),
        Command::Diagnostics(_) => commands::diagnostics(&ctx),
        Command::Partition(p) => commands::partition(&ctx, p.kvector.as_deref()),
        Command::Mixing(_) => commands::mixing(&ctx),
    }
}
