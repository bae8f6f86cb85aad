//! CSV and run-manifest writers shared by every harness output.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{CclError, Result};

/// Writes `header` then `rows` as CSV.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => CclError::io(path, e),
        other => CclError::format("CSV output", format!("{other:?}")),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CclError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(io)?;
    }
    w.flush().map_err(|e| CclError::io(path, e))
}

/// Shortest round-trip decimal form; stable across runs and platforms.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:e}")
}

/// Resolved configuration of a run, echoed as `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunInfo {
    pub command: String,
    pub entries: Vec<(String, String)>,
}

impl RunInfo {
    pub fn new(command: impl Into<String>) -> Self {
        RunInfo {
            command: command.into(),
            entries: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn config_text(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Writes `config.txt` (resolved flags only) and `manifest.txt` (the same
    /// plus library version and wall-clock time) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CclError::io(dir, e))?;
        let config = self.config_text();
        let cfg_path = dir.join("config.txt");
        fs::write(&cfg_path, &config).map_err(|e| CclError::io(&cfg_path, e))?;
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = format!(
            "{config}version = {}\ncreated_unix = {secs}\n",
            crate::VERSION
        );
        let path = dir.join("manifest.txt");
        fs::write(&path, manifest).map_err(|e| CclError::io(path, e))
    }
}
