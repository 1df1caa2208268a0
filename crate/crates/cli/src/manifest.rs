use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Provenance record written before any result file of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub master_seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
}

impl RunManifest {
    pub fn new<P: Serialize>(
        command: &str,
        params: &P,
        master_seed: u64,
        outputs: Vec<PathBuf>,
        argv: Vec<String>,
    ) -> Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            params: serde_json::to_value(params)?,
            master_seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            outputs,
            timestamp: chrono::Utc::now().to_rfc3339(),
            argv,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// `results.csv` -> `results.csv.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
