//! Append-only completion cache.
//!
//! Each line of the cache file is one JSON [`CompletionRecord`]. Records are
//! keyed by (backend name, prompt hash, params digest); the first record for
//! a key wins. A torn final line left by an interrupted run is cut off when
//! the cache is reopened.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Backend, BackendError};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("cache corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub backend: String,
    pub prompt_hash: String,
    pub params_digest: String,
    pub prompt: String,
    pub completion: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

impl CompletionRecord {
    pub fn new(backend: &Backend, prompt: &str, completion: String) -> Self {
        let fetched_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        CompletionRecord {
            backend: backend.name().to_string(),
            prompt_hash: prompt_hash(prompt),
            params_digest: backend.params_digest().to_string(),
            prompt: prompt.to_string(),
            completion,
            fetched_at,
        }
    }

    /// Decodes one cache line, checking that the stored hash matches the prompt.
    pub fn from_line(line: &str) -> Result<Self, String> {
        let rec: CompletionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if rec.prompt_hash != prompt_hash(&rec.prompt) {
            return Err("prompt hash mismatch".into());
        }
        Ok(rec)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    fn key(&self) -> Key {
        Key {
            backend: self.backend.clone(),
            prompt_hash: self.prompt_hash.clone(),
            params_digest: self.params_digest.clone(),
        }
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    backend: String,
    prompt_hash: String,
    params_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub records: usize,
    pub per_backend: BTreeMap<String, usize>,
    pub hits: u64,
    pub misses: u64,
    pub repaired_bytes: u64,
}

#[derive(Debug)]
pub struct CompletionCache {
    entries: RwLock<HashMap<Key, CompletionRecord>>,
    writer: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
    repaired_bytes: u64,
}

impl CompletionCache {
    /// A cache that lives only in memory.
    pub fn in_memory() -> Self {
        CompletionCache {
            entries: RwLock::new(HashMap::new()),
            writer: None,
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            repaired_bytes: 0,
        }
    }

    /// Opens (creating if needed) a cache file for reading and appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut repaired_bytes = 0;
        let mut entries = HashMap::new();
        if path.exists() {
            let bytes = fs::read(path)?;
            let keep = match bytes.iter().rposition(|&b| b == b'\n') {
                Some(i) => i + 1,
                None => 0,
            };
            if keep < bytes.len() {
                repaired_bytes = (bytes.len() - keep) as u64;
                OpenOptions::new()
                    .write(true)
                    .open(path)?
                    .set_len(keep as u64)?;
            }
            let text = std::str::from_utf8(&bytes[..keep]).map_err(|e| CacheError::Corrupt {
                line: 0,
                reason: e.to_string(),
            })?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec =
                    CompletionRecord::from_line(line).map_err(|reason| CacheError::Corrupt {
                        line: i + 1,
                        reason,
                    })?;
                entries.entry(rec.key()).or_insert(rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CompletionCache {
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            repaired_bytes,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn lookup(&self, backend: &Backend, prompt: &str) -> Option<String> {
        let key = Key {
            backend: backend.name().to_string(),
            prompt_hash: prompt_hash(prompt),
            params_digest: backend.params_digest().to_string(),
        };
        self.entries
            .read()
            .expect("cache lock")
            .get(&key)
            .map(|r| r.completion.clone())
    }

    pub fn get_or_complete(&self, backend: &Backend, prompt: &str) -> Result<String, BackendError> {
        if let Some(hit) = self.lookup(backend, prompt) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let completion = backend.complete(prompt)?;
        let record = CompletionRecord::new(backend, prompt, completion);
        Ok(self.insert(record)?)
    }

    /// Stores a record unless its key is already present, returning the
    /// completion that is now cached for the key.
    fn insert(&self, record: CompletionRecord) -> Result<String, CacheError> {
        let mut entries = self.entries.write().expect("cache lock");
        let key = record.key();
        if let Some(existing) = entries.get(&key) {
            return Ok(existing.completion.clone());
        }
        if let Some(writer) = &self.writer {
            let mut line = record.to_line();
            line.push('\n');
            let mut f = writer.lock().expect("cache writer lock");
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        let completion = record.completion.clone();
        entries.insert(key, record);
        Ok(completion)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn stats(&self) -> CacheStats {
        let entries = self.entries.read().expect("cache lock");
        let mut per_backend = BTreeMap::new();
        for rec in entries.values() {
            *per_backend.entry(rec.backend.clone()).or_insert(0) += 1;
        }
        CacheStats {
            records: entries.len(),
            per_backend,
            hits: self.hits(),
            misses: self.misses(),
            repaired_bytes: self.repaired_bytes,
        }
    }
}
