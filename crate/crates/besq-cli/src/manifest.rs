//! Run manifest: resolved config echo, code version, wall time, and a
//! sha256 checksum per emitted artifact. One manifest per run.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::CliError;

#[derive(Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub version: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

pub struct RunContext {
    out_dir: PathBuf,
    command: String,
    config: BTreeMap<String, String>,
    artifacts: Vec<ArtifactEntry>,
    started: Instant,
}

impl RunContext {
    pub fn new(out_dir: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(RunContext {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            config: BTreeMap::new(),
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Record a resolved parameter for the config echo.
    pub fn record(&mut self, key: &str, value: impl std::fmt::Display) {
        self.config.insert(key.to_string(), value.to_string());
    }

    /// Write an artifact inside the output directory and checksum it.
    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(bytes);
        self.artifacts.push(ArtifactEntry {
            file: name.to_string(),
            sha256: format!("{digest:x}"),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::internal(format!("serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_artifact(name, &bytes)
    }

    /// Emit manifest.json (exactly once; consumes the context).
    pub fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts,
        };
        let path = self.out_dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::internal(format!("serialize manifest: {e}")))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}
