use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Input paths as given; output paths relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of_bytes(path: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            path: path.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }

    pub fn of_file(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::read(path, e))?;
        Ok(Self::of_bytes(path.to_string_lossy(), &bytes))
    }
}

/// Everything needed to repeat a run: the resolved configuration (output
/// locations excluded), input digests and the digests of what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Command,
    pub seeds: Vec<u64>,
    /// Digest of configuration and inputs; equal runs share it.
    pub run_digest: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn run_digest(config: &Command, inputs: &[FileDigest]) -> String {
    let hashes: Vec<&str> = inputs.iter().map(|d| d.sha256.as_str()).collect();
    let blob = serde_json::to_vec(&(config, hashes)).expect("config serializes");
    sha256_hex(&blob)
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::User(format!("{} is not a run manifest: {e}", path.display())))
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
