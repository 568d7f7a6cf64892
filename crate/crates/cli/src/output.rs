//! Buffered run outputs and the manifest written next to them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub duration_seconds: f64,
    pub long_running: bool,
    pub status: String,
    pub warnings: Vec<String>,
    pub files: Vec<FileChecksum>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files of one run, held in memory until the run has finished.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, data: Vec<u8>) {
        let name = name.into();
        assert!(is_plain_name(&name) && name != MANIFEST, "bad output name {name}");
        self.files.retain(|(n, _)| *n != name);
        self.files.push((name, data));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }
}

fn is_plain_name(name: &str) -> bool {
    !name.is_empty() && name != "." && name != ".." && !name.contains(['/', '\\'])
}

/// Files left by an earlier run into `dir`, or an error when the directory
/// holds anything this tool did not write.
pub fn previous_outputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let known: BTreeSet<String> = match std::fs::read_to_string(dir.join(MANIFEST)) {
        Ok(text) => {
            let m: RunManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::Validation(format!("{}: unreadable manifest: {e}", dir.display()))
            })?;
            m.files.into_iter().map(|f| f.name).collect()
        }
        Err(_) => BTreeSet::new(),
    };
    let mut stale = Vec::new();
    let mut foreign = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST || (known.contains(&name) && entry.file_type()?.is_file()) {
            stale.push(entry.path());
        } else {
            foreign.push(name);
        }
    }
    if !foreign.is_empty() {
        foreign.sort();
        return Err(CliError::Validation(format!(
            "output directory {} holds files not listed in a run manifest ({}); choose an empty directory",
            dir.display(),
            foreign.join(", ")
        )));
    }
    Ok(stale)
}

/// Replace the previous run's files in `dir` by `outputs` and the manifest.
/// Every path written is `dir/<plain name>`.
pub fn commit(dir: &Path, outputs: &Outputs, mut manifest: RunManifest) -> CliResult<RunManifest> {
    let stale = previous_outputs(dir)?;
    std::fs::create_dir_all(dir)?;
    for p in stale {
        std::fs::remove_file(p)?;
    }
    let mut sorted: Vec<&(String, Vec<u8>)> = outputs.files.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    manifest.files.clear();
    for (name, data) in sorted {
        std::fs::write(dir.join(name), data)?;
        manifest.files.push(FileChecksum {
            name: name.clone(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        });
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST), text + "\n")?;
    Ok(manifest)
}

/// Recompute checksums of the files a manifest lists.
pub fn verify_manifest(dir: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    for f in &m.files {
        let data = std::fs::read(dir.join(&f.name))?;
        if sha256_hex(&data) != f.sha256 || data.len() as u64 != f.bytes {
            return Err(CliError::Invariant(format!("checksum mismatch for {}", f.name)));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest {
            tool: "lcuprep".into(),
            version: "0".into(),
            command: "echo".into(),
            config: RunConfig::default(),
            seed: 0,
            workers: 1,
            duration_seconds: 0.0,
            long_running: false,
            status: "ok".into(),
            warnings: vec![],
            files: vec![],
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn rerun_replaces_old_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.add("a.csv", b"1\n".to_vec());
        o.add("b.csv", b"2\n".to_vec());
        commit(dir.path(), &o, manifest()).unwrap();
        let mut o = Outputs::default();
        o.add("a.csv", b"3\n".to_vec());
        let m = commit(dir.path(), &o, manifest()).unwrap();
        assert_eq!(m.files.len(), 1);
        assert!(!dir.path().join("b.csv").exists());
        verify_manifest(dir.path()).unwrap();
    }

    #[test]
    fn foreign_files_block_the_run() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        assert!(previous_outputs(dir.path()).is_err());
        assert!(commit(dir.path(), &Outputs::default(), manifest()).is_err());
        assert!(dir.path().join("notes.txt").exists());
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.add("a.csv", b"1\n".to_vec());
        commit(dir.path(), &o, manifest()).unwrap();
        std::fs::write(dir.path().join("a.csv"), "2\n").unwrap();
        assert!(matches!(verify_manifest(dir.path()), Err(CliError::Invariant(_))));
    }
}
