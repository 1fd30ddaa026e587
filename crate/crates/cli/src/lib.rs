//! `isp`: configuration-driven runs of the manufactured source-reconstruction
//! experiments with CSV output and a JSON manifest.

pub mod config;
pub mod output;
pub mod runner;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{Mode, RunConfig};
pub use runner::{execute, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Wraps a library error raised by `module` during validation.
    pub fn invalid(module: &str, err: &isp_core::Error) -> Self {
        CliError::Validation(located(module, err))
    }

    /// Wraps a library error raised by `module` while solving.
    pub fn numerical(module: &str, err: &isp_core::Error) -> Self {
        CliError::Numerical(located(module, err))
    }
}

fn located(module: &str, err: &isp_core::Error) -> String {
    match err.step() {
        Some(step) => format!("{module}, step {step}: {}", err.root()),
        None => format!("{module}: {}", err.root()),
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation error in {m}"),
            CliError::Numerical(m) => write!(f, "numerical error in {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "isp", version, about = "Source reconstruction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mode named in the config.
    Run(RunArgs),
    /// Time-step refinement study (mode = convergence).
    Convergence(RunArgs),
    /// Degree-selection table for the noisy measurements (mode = polyfit-analysis).
    Polyfit(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Replace a config entry, e.g. `--override mesh.nx=20`; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Convergence(_) => "convergence",
            Command::Polyfit(_) => "polyfit",
        }
    }
}

/// Parses, validates, runs and writes outputs. Returns the manifest path.
pub fn run_command(command: &Command) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let (args, forced) = match command {
        Command::Run(a) => (a, None),
        Command::Convergence(a) => (a, Some(Mode::Convergence)),
        Command::Polyfit(a) => (a, Some(Mode::PolyfitAnalysis)),
    };
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if let Some(mode) = forced {
        cfg.mode = mode;
    }
    let cfg = cfg.resolve()?;
    let outcome = execute(&cfg)?;
    output::write_outputs(&cfg, command.name(), &outcome, start.elapsed().as_secs_f64())
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match run_command(&cli.command) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("isp: {e}");
            e.exit_code()
        }
    }
}
