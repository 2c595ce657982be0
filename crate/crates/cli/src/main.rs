//! `ctkrylov simulate | reconstruct | compare`.
//!
//! Exit status: 0 on success, 1 when a solver fails numerically, 2 for usage
//! and validation errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctkrylov::Precision;

use commands::CliError;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "ctkrylov", version, about = "Krylov-subspace CT reconstruction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_precision)]
    precision: Option<Precision>,
    /// Worker threads for the projector and noise generation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Noise seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a phantom with clean and noisy projections.
    Simulate,
    /// Run one solver on a projection file.
    Reconstruct {
        /// Projection file base name (overrides the config).
        #[arg(long)]
        projections: Option<PathBuf>,
    },
    /// Run several solvers on the same data and summarize.
    Compare,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse()
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if let Some(p) = cli.precision {
        cfg.precision = p;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Reconstruct { projections: Some(p) } = &cli.command {
        cfg.projections = Some(p.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Invalid("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("cannot start thread pool: {e}")))?;
    }
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, config_path),
        Command::Reconstruct { .. } => commands::reconstruct(&cfg, config_path),
        Command::Compare => commands::compare(&cfg, config_path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
