use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::{CliError, RunConfig};
use crate::Format;

/// What a command produced. `csv` is the tabular body for `--format csv`;
/// commands with a binary artifact put it in `raw` and skip both headers.
pub struct Artifact {
    pub params: Value,
    pub result: Value,
    pub csv: String,
    pub raw: Option<Vec<u8>>,
    pub violation: bool,
}

fn render(cfg: &RunConfig, a: &Artifact) -> Result<Vec<u8>, CliError> {
    if let Some(raw) = &a.raw {
        return Ok(raw.clone());
    }
    let mut echo = serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    echo["params"] = a.params.clone();
    let body = match cfg.format {
        Format::Json => {
            let doc = serde_json::json!({ "config": echo, "result": a.result });
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => format!("# config: {echo}\n{}", a.csv),
    };
    Ok(body.into_bytes())
}

/// Writes to a temp file beside the target and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn emit(cfg: &RunConfig, a: &Artifact) -> Result<(), CliError> {
    let bytes = render(cfg, a)?;
    match &cfg.out {
        Some(p) => write_atomic(p, &bytes),
        None => std::io::stdout()
            .lock()
            .write_all(&bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}
