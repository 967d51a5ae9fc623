//! Per-run manifests: what went in, which configuration, what came out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub threads: usize,
    pub started_at: String,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub notes: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

/// Collects inputs and outputs while a subcommand runs.
pub struct Run {
    command: &'static str,
    config: serde_json::Value,
    started: Instant,
    started_at: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    pub notes: serde_json::Value,
}

impl Run {
    pub fn start(command: &'static str, config: &impl Serialize) -> Result<Self> {
        Ok(Run {
            command,
            config: serde_json::to_value(config)?,
            started: Instant::now(),
            started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: serde_json::Value::Null,
        })
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes the manifest to `path` and returns it.
    pub fn finish(self, path: &Path) -> Result<Manifest> {
        let config_bytes = serde_json::to_vec(&self.config)?;
        let hash_all = |paths: &[PathBuf]| paths.iter().map(|p| digest(p)).collect::<Result<Vec<_>>>();
        let manifest = Manifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(&config_bytes),
            config: self.config,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            threads: rayon::current_num_threads(),
            started_at: self.started_at,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            notes: self.notes,
        };
        std::fs::write(path, serde_json::to_vec_pretty(&manifest)?)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(manifest)
    }
}

/// Manifest location for a run writing into a directory.
pub fn dir_manifest(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

/// Manifest location for a run writing a single file: `<file>.manifest.json`.
pub fn file_manifest(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}
