//! `hawkes`: simulate, fit, evaluate, benchmark and plot Hawkes kernel
//! estimates. See `docs/cli.md` for the full manual.

mod bench;
mod config;
mod error;
mod evaluate;
mod fit;
mod output;
mod plot;
mod simulate;
mod svg;
mod truth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hawkes", version, about = "Non-parametric Bayesian Hawkes kernel estimation")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for simulation, splitting and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Upper bound on concurrently fitted groups.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a toy or custom Hawkes process into a corpus file.
    Simulate(simulate::Args),
    /// Fit every training group of a corpus.
    Fit(fit::Args),
    /// Score fits against a known truth and held-out test groups.
    Evaluate(evaluate::Args),
    /// Time Gibbs iterations against event count.
    Bench(bench::Args),
    /// Render a fit as an SVG band plot.
    Plot(plot::Args),
}

/// Settings shared by every subcommand after merging flags and config.
pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let globals = Globals {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        jobs: cli.jobs.or(config.jobs).unwrap_or(1).max(1),
    };
    match cli.command {
        Command::Simulate(a) => simulate::run(a, &config, &globals),
        Command::Fit(a) => fit::run(a, &config, &globals),
        Command::Evaluate(a) => evaluate::run(a, &config),
        Command::Bench(a) => bench::run(a, &config, &globals),
        Command::Plot(a) => plot::run(a, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
