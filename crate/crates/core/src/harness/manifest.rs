//! Run manifests and file writes.
//!
//! Content hashes are SHA-256 over git's blob framing, `"blob <len>\0" ‖ bytes`. The
//! manifest hash covers the config echo, input files and artifact hashes, never the
//! wall-clock time. Every file is written to a sibling temporary and renamed into place,
//! and the manifest goes last, so an artifact is valid exactly when the manifest lists it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    /// Hashes of files the run read, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckOutcome>,
    /// Hash over everything above.
    pub content_hash: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(config: BTreeMap<String, String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            content_hash: String::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn record(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome { name: name.into(), pass, detail: detail.into() });
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), HarnessError> {
        let bytes = fs::read(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        self.inputs.insert(path.display().to_string(), content_hash(&bytes));
        Ok(())
    }

    /// Write `bytes` as `file` under `dir` (when given) and list it.
    pub fn add_artifact(&mut self, dir: Option<&Path>, file: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        if let Some(dir) = dir {
            write_atomic(&dir.join(file), bytes)?;
        }
        self.artifacts.push(Artifact { file: file.into(), sha256: content_hash(bytes) });
        Ok(())
    }

    pub fn seal(&mut self) {
        let mut blob = String::new();
        blob.push_str(&format!("{} {}\n", self.tool, self.version));
        for (k, v) in &self.config {
            blob.push_str(&format!("config {k}={v}\n"));
        }
        for (k, v) in &self.inputs {
            blob.push_str(&format!("input {k} {v}\n"));
        }
        for a in &self.artifacts {
            blob.push_str(&format!("artifact {} {}\n", a.file, a.sha256));
        }
        for c in &self.checks {
            blob.push_str(&format!("check {} {}\n", c.name, c.pass));
        }
        self.content_hash = content_hash(blob.as_bytes());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(&path, &json)?;
        Ok(path)
    }
}
