//! Provenance records for produced artifacts.
//!
//! A manifest sits next to its artifact as `<artifact>.manifest.json`, so the
//! artifact bytes themselves stay a pure function of inputs and seed.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
    pub started: String,
    pub finished: Option<String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `<artifact>.manifest.json`
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>, started: String) -> Self {
        RunManifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started,
            finished: None,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Writes the manifest beside `artifact` and returns its path.
    pub fn write_sidecar(&self, artifact: &Path) -> Result<PathBuf> {
        let path = sidecar_path(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
