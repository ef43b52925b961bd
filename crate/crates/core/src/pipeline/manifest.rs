//! Run manifests: what a command read and wrote, by content digest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Path relative to the work directory → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Digests of the manifests of sub-commands, in run order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<(String, String)>,
    pub wall_time_ms: u64,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            ..Default::default()
        }
    }

    /// SHA-256 over everything except wall time.
    pub fn digest(&self) -> String {
        let stable = Manifest {
            wall_time_ms: 0,
            ..self.clone()
        };
        sha256_bytes(&serde_json::to_vec(&stable).expect("manifest serializes"))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["digest"] = serde_json::Value::String(self.digest());
        serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Records digests of files relative to a work directory.
pub struct Recorder<'a> {
    root: &'a Path,
    pub manifest: Manifest,
}

impl<'a> Recorder<'a> {
    pub fn new(root: &'a Path, manifest: Manifest) -> Self {
        Recorder { root, manifest }
    }

    fn key(&self, path: &Path) -> String {
        path.strip_prefix(self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let key = self.key(path);
        self.manifest.inputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let key = self.key(path);
        self.manifest.outputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        paths.iter().try_for_each(|p| self.output(p))
    }
}
