//! Run manifests: enough to reproduce a run's outputs exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    /// Digest of the effective configuration after overrides and flags.
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub parallel_build: bool,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    /// Wall-clock time; the only field outside the determinism contract.
    pub timestamp_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64, threads: Option<usize>) -> Self {
        let config = serde_json::to_value(config).expect("serializable config");
        let canonical = serde_json::to_string(&config).expect("serializable config");
        let mut versions = BTreeMap::new();
        versions.insert("twostage-cli", env!("CARGO_PKG_VERSION"));
        versions.insert("twostage-core", twostage::VERSION);
        Self {
            command: command.to_string(),
            config_sha256: sha256_hex(canonical.as_bytes()),
            config,
            seed,
            versions,
            parallel_build: twostage::parallel::Execution::is_parallel_available(),
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
