//! `born-sim` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 capacity
//! error (enumeration past 16 steps), 4 an exact invariant failed.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "born-sim",
    version,
    about = "Rate-weighted measurement model: analytic curves, sampling and exact enumeration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate q(Y), w(Y), Q(Y) and the mean final density matrix.
    Analytic(Overrides),
    /// Sample uniform and rate-weighted ensembles; estimate the Born frequency.
    Sample(Overrides),
    /// Sample conditional-probability trajectories under stepwise extension.
    Trajectory(Overrides),
    /// Exhaustive enumeration (N ≤ 16) and comparison against the sampler.
    Oracle(Overrides),
    /// Write the data behind both panels of the Y-distribution figure.
    Figure2(Overrides),
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let env_seed = std::env::var(config::SEED_ENV).ok();
    match dispatch(&cli.command, env_seed.as_deref()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("born-sim: {e}");
            e.exit_code()
        }
    }
}

type CommandFn = fn(&ExperimentConfig) -> Result<Vec<std::path::PathBuf>, CliError>;

fn dispatch(command: &Command, env_seed: Option<&str>) -> Result<Vec<std::path::PathBuf>, CliError> {
    let (flags, run): (&Overrides, CommandFn) = match command {
        Command::Analytic(f) => (f, commands::cmd_analytic),
        Command::Sample(f) => (f, commands::cmd_sample),
        Command::Trajectory(f) => (f, commands::cmd_trajectory),
        Command::Oracle(f) => (f, commands::cmd_oracle),
        Command::Figure2(f) => (f, commands::cmd_figure2),
    };
    let cfg = config::resolve(flags, env_seed)?;
    if let Some(w) = cfg.kappa_warning() {
        eprintln!("{w}");
    }
    run(&cfg)
}
