//! Batch driver for the fluid-plate laboratory.
//!
//! Exit codes: 0 when every requested audit passes, 1 when an audit fails,
//! 2 for usage or configuration errors, 3 for solver failures.

mod commands;
mod config;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[from] fluidplate::Error),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(fluidplate::Error::Parameter { .. } | fluidplate::Error::Geometry(_) | fluidplate::Error::InitialData(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Output(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "fluidplate", version, about = "Stokes flow under a von Karman plate: simulations, audits and probes")]
struct Cli {
    /// Output directory; defaults to the config value, then `out`.
    #[arg(long, global = true, env = "FLUIDPLATE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Seed for randomized audits.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write the diagnostics CSV, JSON summary and final snapshot.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an audit battery and write a pass/fail report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Run a long-time probe and write its report.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: ProbeKind,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Stokes,
    Plate,
    Energy,
    Ball,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Stationary,
    Dissipativity,
    Separation,
}

/// Where artifacts go and how reports are written.
pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.into()))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

fn output_for(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<Output, CliError> {
    let dir = flag.or_else(|| cfg.diagnostics.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(Output { dir })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let load = |p: &Path| RunConfig::load(p);
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load(&config)?;
            commands::simulate(&cfg, &output_for(cli.output_dir, &cfg)?)
        }
        Command::Verify { config, suite } => {
            let cfg = load(&config)?;
            verify::run(&cfg, suite, cli.seed, &output_for(cli.output_dir, &cfg)?)
        }
        Command::Probe { config, kind } => {
            let cfg = load(&config)?;
            commands::probe(&cfg, kind, &output_for(cli.output_dir, &cfg)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
