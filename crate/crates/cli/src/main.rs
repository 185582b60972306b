use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fixlab_cli::{execute, CliError, Command, Overrides, Period, RunConfig};
use tracing_subscriber::EnvFilter;

/// FX fix engine, tick-market simulator and fix-window analyses.
#[derive(Debug, Parser)]
#[command(name = "fixlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate the configured scenario; writes bars.csv and ticks.csv.
    Simulate(Common),
    /// Compute the fix of every configured pair for each date in a tick file.
    Fix(Common),
    /// Per-minute volatility profiles and spikes.
    Vol(Common),
    /// Extrema probability surfaces.
    Extrema(Common),
    /// Centred-extremum histograms.
    Centered(Common),
    /// Run every stage the configuration has data for.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to one configured pair.
    #[arg(long)]
    pair: Option<String>,
    #[arg(long, value_enum)]
    period: Option<Period>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Tick CSV for `fix`, bar CSV otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Fix(c) => (Command::Fix, c),
        Sub::Vol(c) => (Command::Vol, c),
        Sub::Extrema(c) => (Command::Extrema, c),
        Sub::Centered(c) => (Command::Centered, c),
        Sub::Report(c) => (Command::Report, c),
    };
    let config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        pair: common.pair,
        period: common.period,
        out: common.out,
        seed: common.seed,
        input: common.input,
    };
    Ok(execute(command, config, overrides)?.dir)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fixlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
