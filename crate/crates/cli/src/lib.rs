//! Config-driven runner for the `ltfair` experiments.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when the solver reports the
//! problem infeasible.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Experiment, ExperimentConfig, OUT_DIR_ENV};
pub use error::{CliError, CliResult, Outcome};

#[derive(Debug, Parser)]
#[command(name = "ltfair", version, about = "Long-term fair decision policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write the report and policy.
    Solve,
    /// Simulate a stored policy and write the trajectory CSV.
    Simulate,
    /// Compare the long-term policy with retrained short-term baselines.
    Compare,
    /// Solve on models estimated from probe data.
    Estimate,
    /// List dynamics and optimization presets.
    Presets,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    if cli.command == Command::Presets {
        return commands::cmd_presets();
    }
    let exp = Experiment::load(cli.config.as_deref(), cli.out.clone(), cli.seed)?;
    match cli.command {
        Command::Solve => commands::cmd_solve(&exp),
        Command::Simulate => commands::cmd_simulate(&exp),
        Command::Compare => commands::cmd_compare(&exp),
        Command::Estimate => commands::cmd_estimate(&exp),
        Command::Presets => unreachable!(),
    }
}
