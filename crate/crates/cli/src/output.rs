//! CSV formatting and the run manifest.

use std::path::PathBuf;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::runner::Outcome;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Empty field for a missing value.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_float)
}

#[derive(Debug)]
pub struct Csv {
    columns: usize,
    text: String,
    rows: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
            rows: 0,
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len(), self.columns, "csv row width");
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the CSVs and `manifest.json` into the configured directory and
/// returns the manifest path.
pub fn write_outputs(cfg: &RunConfig, command: &str, outcome: &Outcome, wall_time: f64) -> Result<PathBuf, CliError> {
    let dir = &cfg.output_dir;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::new();
    for f in &outcome.files {
        std::fs::write(dir.join(f.name), &f.contents).map_err(io)?;
        files.push(json!({
            "name": f.name,
            "bytes": f.contents.len(),
            "sha256": sha256_hex(f.contents.as_bytes()),
        }));
    }
    let manifest = json!({
        "command": command,
        "config": cfg,
        "files": files,
        "summary": outcome.summary,
        "wall_time_seconds": wall_time,
    });
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(io)?;
    Ok(path)
}
