//! Run manifests: command line, resolved configuration, version, timestamps
//! and content hashes of every emitted file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects emitted files during a run and writes the manifest at the end.
pub struct RunRecorder {
    dir: PathBuf,
    command: String,
    command_line: Vec<String>,
    started: String,
    outputs: Vec<PathBuf>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunRecorder {
    /// Creates the output directory if needed.
    pub fn start(dir: &Path, command: &str, command_line: Vec<String>) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(RunRecorder {
            dir: dir.to_path_buf(),
            command: command.into(),
            command_line,
            started: now(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of an output file inside the run directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record(&mut self, path: PathBuf) {
        if !self.outputs.contains(&path) {
            self.outputs.push(path);
        }
    }

    pub fn record_all(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            self.record(p);
        }
    }

    /// Hashes every recorded file and writes `manifest.json` atomically.
    pub fn finish(self, config: serde_json::Value, seed: Option<u64>) -> CliResult<RunManifest> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            outputs.push(OutputFile {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = RunManifest {
            command_line: self.command_line,
            command: self.command,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started: self.started,
            finished: now(),
            outputs,
        };
        let path = self.dir.join(MANIFEST_NAME);
        write_atomic(
            &path,
            &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e.to_string()))
}

/// Recomputes every listed hash; returns the paths that no longer match.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .outputs
        .iter()
        .filter(|o| fs::read(dir.join(&o.path)).map_or(true, |b| sha256_hex(&b) != o.sha256))
        .map(|o| o.path.clone())
        .collect()
}
