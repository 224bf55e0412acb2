//! `rccda`: run, sweep and verify drift-adaptive update experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rccda_core::Error;

/// Exit status for invalid configuration files or overrides.
pub const EXIT_CONFIG: u8 = 3;
/// Exit status when at least one bound check failed.
pub const EXIT_BOUND: u8 = 4;
/// Exit status for file-system and serialization failures.
pub const EXIT_IO: u8 = 5;
/// Exit status for any other runtime failure.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "rccda", version, about = "Resource-constrained model updates under concept drift")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Suite configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, env = "RCCDA_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `policies.0.v_weight=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Number of episodes run concurrently.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub parallel: Option<u16>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (schedule, policy) pair on every seed.
    Run(Common),
    /// Run the suite once per point of a grid of override values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis as `KEY=[v1, v2, ...]`; adds to the config's [sweep] table.
        #[arg(long, value_name = "KEY=VALUES")]
        vary: Vec<String>,
    },
    /// Run with oracle instrumentation and check every bound.
    Verify(Common),
    /// Print and write drift rates, drift magnitudes and pool composition.
    PreviewSchedule(Common),
}

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_CONFIG,
            Error::Io { .. } | Error::Format { .. } => EXIT_IO,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let result = match &cli.command {
        Command::Run(c) => commands::run(c),
        Command::Sweep { common, vary } => commands::sweep(common, vary),
        Command::Verify(c) => commands::verify(c),
        Command::PreviewSchedule(c) => commands::preview_schedule(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
