//! `cocycle-lab`: command-line driver for invariant-section computations.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, Threads};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cocycle-lab", version, about = "Invariant sections of quasi-periodic Schrödinger cocycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (TOML, or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set energy.values=[-1.5]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump both invariant sections at a single energy.
    Curve(Common),
    /// Locate the lowest spectral edge by bisection.
    Edge(Common),
    /// Geometric energy sweep towards the edge, with fits.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Stop after computing this many new energies (the checkpoint is kept).
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Print the scale ladder as JSON.
    Ladder(Common),
    /// Run the property and identity suite.
    Check(Common),
    /// Refit an existing sweep CSV.
    Fit(Common),
}

fn configure_threads(config: &RunConfig) -> Result<(), CliError> {
    let from_env = match std::env::var("COCYCLE_LAB_THREADS") {
        Ok(v) if v.trim() == "auto" => Some(Threads::Auto),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(Threads::Count(n)),
            _ => return Err(CliError::Validation(format!("COCYCLE_LAB_THREADS must be a positive integer or \"auto\", got {v:?}"))),
        },
        Err(_) => None,
    };
    if let Threads::Count(n) = from_env.unwrap_or(config.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Curve(c) | Command::Edge(c) | Command::Ladder(c) | Command::Check(c) | Command::Fit(c) => c,
        Command::Sweep { common, .. } => common,
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.sets)?;
    configure_threads(&cfg.config)?;
    match cli.command {
        Command::Curve(_) => commands::curve(&cfg),
        Command::Edge(_) => commands::edge(&cfg),
        Command::Sweep { stop_after, .. } => commands::sweep(&cfg, stop_after),
        Command::Ladder(_) => commands::ladder(&cfg),
        Command::Check(_) => commands::check(&cfg),
        Command::Fit(_) => commands::fit(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
