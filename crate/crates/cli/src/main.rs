//! `rss`: runs subset-sum experiments from a JSON config.
//!
//! Exit codes: 0 success, 1 a bound was violated, 2 bad config or usage,
//! 3 invalid parameters, 4 I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Sample,
    Bounds,
    Solve,
    Cover,
    Moments,
    Joint,
    Sweep,
    Claims,
    NneDemo,
    Walk,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Bounds => "bounds",
            Command::Solve => "solve",
            Command::Cover => "cover",
            Command::Moments => "moments",
            Command::Joint => "joint",
            Command::Sweep => "sweep",
            Command::Claims => "claims",
            Command::NneDemo => "nne-demo",
            Command::Walk => "walk",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rss", version, about = "Random subset sum experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Strict JSON config; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    let resolved = config::resolve(&cli)?;
    let artifact = commands::dispatch(&resolved)?;
    output::emit(&resolved, &artifact)?;
    Ok(artifact.violation)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("rss: at least one bound was violated");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("rss: {e}");
            ExitCode::from(e.code())
        }
    }
}
