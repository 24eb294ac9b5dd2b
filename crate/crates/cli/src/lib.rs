//! Command-line front end for `hamloop`: hypothesis checks, solving by
//! either route, and independent verification of orbit tables.

pub mod commands;
pub mod config;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::{ConfigArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hamloop", version, about = "Fixed-energy periodic orbits of q'' + V'(q) = 0")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check hypotheses (B1)-(B5) by sampling.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
        /// Leave the timestamp out of the report.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Find a critical loop, synthesize the orbit and gate its residuals.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Recompute residuals of an orbit table.
    Verify {
        /// Orbit table; defaults to --orbit.
        file: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let mut out = std::io::stdout().lock();
    let resolve = |args: &ConfigArgs| RunConfig::resolve(args).map_err(CliError::Usage);
    match &cli.command {
        Command::Check { config, no_timestamp } => commands::cmd_check(&resolve(config)?, !no_timestamp, &mut out),
        Command::Solve { config, no_timestamp } => commands::cmd_solve(&resolve(config)?, !no_timestamp, &mut out),
        Command::Verify { file, config } => {
            let cfg = resolve(config)?;
            let path = file
                .clone()
                .or_else(|| cfg.orbit.clone())
                .ok_or_else(|| CliError::Usage(anyhow::anyhow!("verify needs an orbit file")))?;
            commands::cmd_verify(&cfg, &path, &mut out)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            e.code()
        }
    }
}
