use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spacearm_core::dynamics::hex_digest;

use crate::CliError;

/// Machine-readable description of a run directory.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub model_checksum: String,
    /// SHA-256 of the configuration snapshot.
    pub config_hash: String,
    pub workers: Option<usize>,
    /// Output file name to SHA-256.
    pub files: BTreeMap<String, String>,
    /// Checkpoints read, path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, model_checksum: &str, config_toml: &str, workers: Option<usize>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            model_checksum: model_checksum.into(),
            config_hash: hex_digest(config_toml.as_bytes()),
            workers,
            files: BTreeMap::new(),
            inputs: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn hash_file(path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
        Ok(hex_digest(&bytes))
    }

    pub fn add_output(&mut self, dir: &Path, path: &Path) -> Result<(), CliError> {
        let name = path.strip_prefix(dir).unwrap_or(path).display().to_string();
        self.files.insert(name, Self::hash_file(path)?);
        Ok(())
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), Self::hash_file(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
