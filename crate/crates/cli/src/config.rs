use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Cli, Command, Format};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Param(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Param(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Param(m) => write!(f, "parameter error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<rss_core::Error> for CliError {
    fn from(e: rss_core::Error) -> Self {
        use rss_core::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Format(_) => CliError::Io(e.to_string()),
            other => CliError::Param(other.to_string()),
        }
    }
}

impl From<rss_core::ParamError> for CliError {
    fn from(e: rss_core::ParamError) -> Self {
        CliError::Param(e.to_string())
    }
}

/// On-disk layout of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    seed: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    #[serde(default)]
    params: Option<Value>,
}

/// Fully resolved run: flags override the file, defaults fill the rest.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Raw command parameters; each command parses them strictly and
    /// replaces this with the resolved value.
    pub params: Value,
    #[serde(skip)]
    pub kind: Command,
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(c) = &file.command {
        if c != cli.command.name() {
            return Err(CliError::Config(format!(
                "`command` is `{c}` in the config but `{}` on the command line",
                cli.command.name()
            )));
        }
    }
    Ok(RunConfig {
        command: cli.command.name(),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        format: cli.format.or(file.format).unwrap_or(Format::Json),
        out: cli.out.clone().or(file.out),
        params: file.params.unwrap_or_else(|| Value::Object(Default::default())),
        kind: cli.command,
    })
}

/// Parses a command's parameter block, rejecting unknown keys.
pub fn parse_params<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Config(format!("params: {e}")))
}
