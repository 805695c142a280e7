//! Atomic file output and the run manifest embedded in every JSON artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What produced an artifact. Deliberately free of timestamps and host details
/// so identical runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub inputs: Vec<InputDigest>,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: &'a T,
}

/// Collects inputs and outputs for one command and writes them atomically.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    pub fn new(dir: &Path, command: &str, config: serde_json::Value, master_seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.into(),
                config,
                master_seed,
                inputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                outputs: Vec::new(),
            },
        })
    }

    /// Resolve `name` against the output directory unless it is absolute.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Read an input file (relative to the output directory) and record its digest.
    pub fn read_input(&mut self, name: &str) -> Result<Vec<u8>, CliError> {
        let path = self.path(name);
        self.read_path(&path, name)
    }

    pub fn read_path(&mut self, path: &Path, label: &str) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.manifest.inputs.push(InputDigest { path: label.into(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(bytes)
    }

    /// Declare an output before writing, so it appears in every manifest of the run.
    pub fn declare(&mut self, name: &str) {
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.into());
        }
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        let parent = path.parent().unwrap_or(&self.dir);
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| CliError::io(parent, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        Ok(())
    }

    /// Write `body` as pretty JSON with the manifest embedded.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(&Envelope { manifest: &self.manifest, body })
            .map_err(|e| CliError::validation(e.to_string()))?;
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    pub fn write_with<F>(&self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> rtlab_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_bytes(name, &buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("in.txt"), b"abc").unwrap();
        let mut run = Run::new(dir.path(), "t", serde_json::json!({"k": 1}), 3).unwrap();
        run.read_input("in.txt").unwrap();
        run.declare("out.json");
        run.write_json("out.json", &serde_json::json!({"x": 2})).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out.json")).unwrap()).unwrap();
        assert_eq!(v["x"], 2);
        assert_eq!(v["manifest"]["outputs"][0], "out.json");
        // sha256("abc")
        assert_eq!(v["manifest"]["inputs"][0]["sha256"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn missing_input_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::new(dir.path(), "t", serde_json::Value::Null, 0).unwrap();
        let err = run.read_input("nope.jsonl").unwrap_err();
        assert_eq!(err.code, 1);
        assert!(err.message.contains("nope.jsonl"));
    }
}
