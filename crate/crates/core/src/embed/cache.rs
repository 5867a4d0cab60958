//! Content-addressed embedding store.
//!
//! ```text
//! <root>/index.jsonl            one line per stored key
//! <root>/objects/ab/abcd….bin   little-endian f64 values
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbedError, Pooling};
use crate::io::atomic_write;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub provider_name: String,
    pub content_hash: [u8; 32],
    pub pooling: Pooling,
}

impl CacheKey {
    /// Hashes the exact UTF-8 bytes of `text`; no normalization.
    pub fn new(provider_name: &str, text: &str, pooling: Pooling) -> Self {
        Self {
            provider_name: provider_name.to_string(),
            content_hash: Sha256::digest(text.as_bytes()).into(),
            pooling,
        }
    }

    /// Hex digest identifying the (provider, pooling, content) triple.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.provider_name.as_bytes());
        h.update([0]);
        h.update(self.pooling.name().as_bytes());
        h.update([0]);
        h.update(self.content_hash);
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexLine {
    key: String,
    provider: String,
    pooling: Pooling,
    content_hash: String,
    dim: usize,
}

#[derive(Debug)]
pub struct EmbeddingCache {
    root: PathBuf,
    write_lock: Mutex<()>,
}

fn cache_err(e: impl std::fmt::Display) -> EmbedError {
    EmbedError::Cache(e.to_string())
}

impl EmbeddingCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, EmbedError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects")).map_err(cache_err)?;
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, id: &str) -> PathBuf {
        self.root.join("objects").join(&id[..2]).join(format!("{id}.bin"))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<Vec<f64>>, EmbedError> {
        let path = self.object_path(&key.id());
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(format!("{}: {e}", path.display()))),
        };
        if bytes.is_empty() || bytes.len() % 8 != 0 {
            return Err(cache_err(format!("{}: {} bytes is not a vector of f64", path.display(), bytes.len())));
        }
        Ok(Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ))
    }

    pub fn put(&self, key: &CacheKey, values: &[f64]) -> Result<(), EmbedError> {
        let id = key.id();
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let path = self.object_path(&id);
        if path.exists() {
            return Ok(());
        }
        atomic_write(&path, &bytes).map_err(cache_err)?;
        let line = IndexLine {
            key: id,
            provider: key.provider_name.clone(),
            pooling: key.pooling,
            content_hash: hex::encode(key.content_hash),
            dim: values.len(),
        };
        let mut index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("index.jsonl"))
            .map_err(cache_err)?;
        let mut text = serde_json::to_string(&line).map_err(cache_err)?;
        text.push('\n');
        index.write_all(text.as_bytes()).map_err(cache_err)
    }

    /// Number of entries recorded in the index.
    pub fn len(&self) -> Result<usize, EmbedError> {
        match fs::read_to_string(self.root.join("index.jsonl")) {
            Ok(t) => Ok(t.lines().filter(|l| !l.trim().is_empty()).count()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(cache_err(e)),
        }
    }

    pub fn is_empty(&self) -> Result<bool, EmbedError> {
        Ok(self.len()? == 0)
    }
}
