//! Result documents and CSV series.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub command: String,
    pub version: String,
    /// Validated configuration, overrides applied.
    pub config: ExperimentConfig,
    /// Content hashes of the cached artifacts that were consumed.
    pub artifacts: BTreeMap<String, String>,
    pub scalars: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    /// Series name to CSV path relative to the output directory.
    pub series: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

impl ResultDocument {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            artifacts: BTreeMap::new(),
            scalars: BTreeMap::new(),
            labels: BTreeMap::new(),
            series: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.into(), value);
    }

    pub fn label(&mut self, name: &str, value: impl Into<String>) {
        self.labels.insert(name.into(), value.into());
    }

    /// Records a check that `value` lies in `[min, max]`.
    pub fn check(&mut self, name: &str, value: f64, min: f64, max: f64) {
        let passed = value >= min && value <= max;
        self.checks.push(Check { name: name.into(), value, min, max, passed });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Single writer for everything a command emits under `<out>/<command>/`.
pub struct Writer {
    root: PathBuf,
    dir: PathBuf,
}

impl Writer {
    pub fn new(root: &Path, command: &str) -> Result<Self> {
        let dir = root.join(command);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
        Ok(Self { root: root.to_path_buf(), dir })
    }

    pub fn series<R: Serialize>(&self, doc: &mut ResultDocument, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let path = self.dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        let rel = path.strip_prefix(&self.root).unwrap_or(&path);
        doc.series.insert(name.into(), rel.display().to_string());
        Ok(())
    }

    pub fn finish(&self, doc: &ResultDocument) -> Result<PathBuf> {
        let path = self.dir.join("result.json");
        fs::write(&path, serde_json::to_string_pretty(doc)?).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Ok(path)
    }
}
