//! Run manifest: which trial indices are done, and checksums of every artifact.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub index: usize,
    /// global trial indices `first..end`
    pub first: u64,
    pub end: u64,
    /// path relative to the output directory
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub total_trials: u64,
    pub chunks: Vec<ChunkEntry>,
    pub files: Vec<FileEntry>,
    pub complete: bool,
    pub created_unix: u64,
    pub updated_unix: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, total_trials: u64) -> Self {
        let now = now_unix();
        Self {
            schema_version: crate::SCHEMA_VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            total_trials,
            chunks: Vec::new(),
            files: Vec::new(),
            complete: false,
            created_unix: now,
            updated_unix: now,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Corrupt { path: path.into(), reason: e.to_string() })
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.updated_unix = now_unix();
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn chunk(&self, index: usize) -> Option<&ChunkEntry> {
        self.chunks.iter().find(|c| c.index == index)
    }

    pub fn record_chunk(&mut self, entry: ChunkEntry) {
        self.chunks.retain(|c| c.index != entry.index);
        self.chunks.push(entry);
        self.chunks.sort_by_key(|c| c.index);
    }

    pub fn completed_indices(&self) -> BTreeSet<u64> {
        self.chunks.iter().flat_map(|c| c.first..c.end).collect()
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.file == name)
    }
}

/// Write to a sibling temporary file, sync, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    {
        let mut f = fs::File::create(&tmp).map_err(HarnessError::io(&tmp))?;
        f.write_all(bytes).map_err(HarnessError::io(&tmp))?;
        f.sync_all().map_err(HarnessError::io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(HarnessError::io(path))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_bytes(&fs::read(path).map_err(HarnessError::io(path))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(Experiment::Variance, vec![2], vec![2], 4);
        let mut m = RunManifest::new(&cfg, 4);
        m.record_chunk(ChunkEntry { index: 1, first: 2, end: 4, file: "chunks/b.csv".into(), sha256: "x".into() });
        m.record_chunk(ChunkEntry { index: 0, first: 0, end: 2, file: "chunks/a.csv".into(), sha256: "y".into() });
        let path = dir.path().join(MANIFEST_FILE);
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.completed_indices().into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
