//! Run manifest: configuration snapshot, hashed artifact list and summary metrics.
//!
//! Only `metadata` carries wall-clock information; everything else is a pure function of
//! configuration and seed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::{read_bytes, write_bytes};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "dynoct-manifest v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub seed: u64,
    pub experiment_hash: String,
    pub config: String,
    pub artifacts: Vec<Artifact>,
    pub summary: BTreeMap<String, f64>,
    /// Excluded from any determinism comparison.
    pub metadata: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(seed: u64, experiment_hash: String, config: String) -> Self {
        let mut metadata = BTreeMap::new();
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        metadata.insert("created_unix".to_string(), now.to_string());
        metadata.insert("tool".to_string(), format!("dynoct {}", env!("CARGO_PKG_VERSION")));
        Self {
            format: MANIFEST_FORMAT.to_string(),
            seed,
            experiment_hash,
            config,
            artifacts: Vec::new(),
            summary: BTreeMap::new(),
            metadata,
        }
    }

    /// Writes `bytes` to `dir/name` and records (or refreshes) its hash.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_bytes(&dir.join(name), bytes)?;
        let sha256 = sha256_hex(bytes);
        match self.artifacts.iter_mut().find(|a| a.name == name) {
            Some(a) => a.sha256 = sha256,
            None => self.artifacts.push(Artifact { name: name.to_string(), sha256 }),
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Integrity(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        write_bytes(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = read_bytes(&path)?;
        let m: Self = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Format { path, reason: format!("unsupported format `{}`", m.format) });
        }
        Ok(m)
    }

    /// Checks that every listed artifact exists in `dir` and matches its recorded hash.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            let bytes = std::fs::read(&path).map_err(|e| {
                Error::Integrity(format!("artifact {} unreadable: {e}", path.display()))
            })?;
            let got = sha256_hex(&bytes);
            if got != a.sha256 {
                return Err(Error::Integrity(format!(
                    "hash mismatch for {}: manifest {}, file {got}",
                    a.name, a.sha256
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_missing_and_modified_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(3, "abc".into(), "[run]\n".into());
        m.write_artifact(dir.path(), "a.txt", b"hello").unwrap();
        m.write_artifact(dir.path(), "b.txt", b"world").unwrap();
        m.set("cutoff", 4.0);
        m.save(dir.path()).unwrap();
        let loaded = RunManifest::load(dir.path()).unwrap();
        assert_eq!(loaded, m);
        loaded.validate(dir.path()).unwrap();

        std::fs::write(dir.path().join("a.txt"), b"HELLO").unwrap();
        assert!(matches!(loaded.validate(dir.path()), Err(Error::Integrity(_))));
        std::fs::remove_file(dir.path().join("b.txt")).unwrap();
        std::fs::write(dir.path().join("a.txt"), b"hello").unwrap();
        assert!(matches!(loaded.validate(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn rewriting_an_artifact_updates_its_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(1, String::new(), String::new());
        m.write_artifact(dir.path(), "x", b"1").unwrap();
        m.write_artifact(dir.path(), "x", b"2").unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.artifacts[0].sha256, sha256_hex(b"2"));
    }
}
