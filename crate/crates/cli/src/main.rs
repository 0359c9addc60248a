//! `sojourn` - simulation and verification of sojourn functionals of
//! long-memory spatiotemporal Gaussian fields.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure,
//! 4 acceptance-gate failure (with --gate).

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sojourn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: SOJOURN_THREADS or all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate pair-distance densities (closed form vs Monte Carlo)
    Density(Common),
    /// Tabulate a covariance model and its spectral densities
    Covariance(Common),
    /// Chaos variances over a T grid with the fitted growth law
    Variance(Common),
    /// Simulate one field realization to CSV or a binary block
    Simulate(Common),
    /// Run a declarative Monte Carlo experiment
    Experiment(ExperimentArgs),
    /// Second-chaos (Rosenblatt-type) sampler draws and cumulants
    Rosenblatt(Common),
    /// List shipped experiment presets
    Presets,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// Use a shipped preset instead of --config
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Exit with code 4 when any acceptance gate fails
    #[arg(long)]
    gate: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Density(c)
        | Command::Covariance(c)
        | Command::Variance(c)
        | Command::Simulate(c)
        | Command::Rosenblatt(c) => c.threads,
        Command::Experiment(e) => e.common.threads,
        Command::Presets => None,
    };
    init_threads(threads);
    let outcome = match cli.command {
        Command::Density(c) => commands::density(&c),
        Command::Covariance(c) => commands::covariance(&c),
        Command::Variance(c) => commands::variance(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Rosenblatt(c) => commands::rosenblatt(&c),
        Command::Experiment(e) => commands::experiment(&e),
        Command::Presets => {
            for name in sojourn_core::experiment::preset_names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match outcome {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::GateFailure) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                sojourn_core::Error::Config(_) | sojourn_core::Error::InvalidParameter { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

fn init_threads(cli_threads: Option<usize>) {
    let n = cli_threads.or_else(|| {
        std::env::var("SOJOURN_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
