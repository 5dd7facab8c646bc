//! Command-line driver for `robin-core`: TOML configuration, CSV output and
//! a threaded executor for independent solves.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod exec;

use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{load, Overrides, RunConfig, SchemeName};
pub use error::{CliError, Result};
pub use exec::Threads;

#[derive(Debug, Parser)]
#[command(
    name = "robin",
    version,
    about = "Inverse Robin coefficient problems on an annulus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration
    #[arg(long, global = true, default_value = "robin.toml")]
    pub config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides every seed in the configuration
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound on concurrent independent solves
    #[arg(long, global = true, default_value = "1")]
    pub jobs: NonZeroUsize,
    /// Time-stepping scheme for parabolic problems
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeName>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Forward solve; writes the field and both boundary traces
    Forward,
    /// Sensitivity solve for the configured direction; writes w(d) and N(d)
    Sensitivity,
    /// Projected Levenberg-Marquardt reconstruction of the coefficient
    Reconstruct,
    /// Empirical Lipschitz ratios around the configured coefficient
    Probe,
    /// Linearized maps under Robin, Neumann and Dirichlet outer conditions
    CompareBc,
    /// Analytic oracle consistency checks
    OracleCheck,
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load(
        &cli.config,
        Overrides {
            seed: cli.seed,
            scheme: cli.scheme,
        },
    )?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Output {
        path: cli.out.clone(),
        message: e.to_string(),
    })?;
    let exec = Threads::new(cli.jobs);
    let out = cli.out.as_path();
    match cli.command {
        Command::Forward => commands::forward(&cfg, out),
        Command::Sensitivity => commands::sensitivity(&cfg, out),
        Command::Reconstruct => commands::reconstruct_cmd(&cfg, out, &exec),
        Command::Probe => commands::probe(&cfg, out, &exec),
        Command::CompareBc => commands::compare_bc(&cfg, out, &exec),
        Command::OracleCheck => commands::oracle_check(&cfg, out),
    }
}
