//! Per-run manifest written next to the outputs; schema in `docs/manifest.md`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl OutputFile {
    pub fn describe(name: &str, contents: &[u8]) -> Self {
        Self { path: name.to_string(), sha256: sha256_hex(contents), bytes: contents.len() as u64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub preset: String,
    /// SHA-256 of the config file, empty when none was given.
    pub config_sha256: String,
    /// Command-line overrides as given (flag → value).
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<OutputFile>,
    pub wall_clock_s: f64,
    pub threads: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}.manifest.json")
    }

    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        let path = dir.join(Self::file_name(&self.subcommand));
        let mut text = serde_json::to_string_pretty(self).map_err(|e| AppError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
    }
}
