use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Provenance record written into every run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    /// Content hashes keyed by corpus role (`train`, `dev`).
    pub corpus_hashes: BTreeMap<String, String>,
    pub toolkit_version: String,
    pub started: String,
    pub finished: Option<String>,
    pub status: String,
    /// Files the command produced, relative to the run directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Self {
            schema_version: MANIFEST_VERSION,
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash8()?,
            seed: config.seed,
            corpus_hashes: BTreeMap::new(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
            status: "running".into(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn finish(&mut self, status: &str) {
        self.finished = Some(now());
        self.status = status.to_string();
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Creates `<out>/<timestamp>-<hash8>` exclusively, appending `-1`, `-2`,
/// ... when another invocation already holds the name.
pub fn create_run_dir(out: &Path, config: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-{}", config.hash8()?);
    for k in 0.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let path = out.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&path, e)),
        }
    }
    unreachable!()
}
