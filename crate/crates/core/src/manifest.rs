//! Run manifests: which command, config and inputs produced which output
//! files, with SHA-256 digests for tamper detection.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub created_unix_ms: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `<file>.manifest.json` next to `file`.
pub fn manifest_path(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    file.with_file_name(name)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: Option<u64>, inputs: &[&Path], outputs: &[&Path]) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            created_unix_ms: now_ms(),
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        })
    }

    fn same_content(&self, other: &Self) -> bool {
        self.tool_version == other.tool_version
            && self.command == other.command
            && self.config == other.config
            && self.seed == other.seed
            && self.inputs == other.inputs
            && self.outputs == other.outputs
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Writes to `path` unless an existing manifest there records the same
    /// run, so identical reruns leave every file byte-identical.
    pub fn store(&self, path: &Path) -> Result<()> {
        if let Ok(existing) = Self::load(path) {
            if existing.same_content(self) {
                return Ok(());
            }
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks the digest recorded for `file` against its current content.
    pub fn verify_output(&self, file: &Path) -> Result<()> {
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned());
        let entry = self
            .outputs
            .iter()
            .find(|d| Path::new(&d.path).file_name().map(|n| n.to_string_lossy().into_owned()) == name)
            .ok_or_else(|| Error::Lookup(format!("manifest does not list {}", file.display())))?;
        let actual = file_sha256(file)?;
        if actual != entry.sha256 {
            return Err(Error::DigestMismatch {
                path: file.to_path_buf(),
                expected: entry.sha256.clone(),
                actual,
            });
        }
        Ok(())
    }
}

/// Verifies `file` against its sibling manifest. `Ok(false)` when there is
/// no manifest to check against.
pub fn verify_against_manifest(file: &Path) -> Result<bool> {
    let mpath = manifest_path(file);
    if !mpath.exists() {
        return Ok(false);
    }
    RunManifest::load(&mpath)?.verify_output(file)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, "abc").unwrap();
        assert_eq!(
            file_sha256(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(manifest_path(&f), dir.path().join("a.txt.manifest.json"));
    }

    #[test]
    fn tamper_detected_and_rerun_stable() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("out.jsonl");
        std::fs::write(&f, "x\n").unwrap();
        let m = RunManifest::new("generate", serde_json::json!({"seed": 1}), Some(1), &[], &[&f]).unwrap();
        let mp = manifest_path(&f);
        m.store(&mp).unwrap();
        assert!(verify_against_manifest(&f).unwrap());
        let before = std::fs::read(&mp).unwrap();

        let mut later = RunManifest::new("generate", serde_json::json!({"seed": 1}), Some(1), &[], &[&f]).unwrap();
        later.created_unix_ms += 10_000;
        later.store(&mp).unwrap();
        assert_eq!(std::fs::read(&mp).unwrap(), before);

        std::fs::write(&f, "y\n").unwrap();
        assert!(matches!(verify_against_manifest(&f), Err(Error::DigestMismatch { .. })));
        assert!(!verify_against_manifest(&dir.path().join("none")).unwrap());
    }
}
