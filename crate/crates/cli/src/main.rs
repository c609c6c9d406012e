use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use vtol_cli::commands::{self, Output};
use vtol_cli::config::{RawConfig, Settings};

/// PVTOL closed-loop simulation and verification.
#[derive(Debug, Parser)]
#[command(name = "vtol", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file (flat keys under dotted sections).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV files and the effective config.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Master seed for Monte-Carlo draws [default: 42, or montecarlo.seed].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override a config key, e.g. `--set sim.dt=5e-4` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop simulation.
    Simulate,
    /// Run both controllers on the same scenario and compare costs.
    Compare,
    /// Perturbed-input-gain Monte-Carlo runs.
    Montecarlo,
    /// Certify the CLF over a gain grid.
    VerifyClf,
    /// Integrate the zero dynamics alone.
    ZeroDynamics,
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for s in &cli.sets {
        raw.set(s)?;
    }
    let mut settings = Settings::from_raw(&raw)?;
    if let Some(seed) = cli.seed {
        settings.montecarlo.seed = seed;
    }
    Ok(settings)
}

fn run(cli: &Cli) -> Result<u8> {
    let settings = settings(cli)?;
    let out = Output::new(&cli.out)?;
    let jobs = cli
        .jobs
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match cli.command {
        Command::Simulate => commands::simulate(&settings, &out),
        Command::Compare => commands::compare(&settings, &out),
        Command::Montecarlo => commands::montecarlo(&settings, &out, jobs),
        Command::VerifyClf => commands::verify_clf(&settings, &out),
        Command::ZeroDynamics => commands::zero_dynamics(&settings, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
