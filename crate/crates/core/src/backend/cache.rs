//! Content-addressed logit cache persisted as append-only JSONL.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LogitQuery;
use crate::error::DataError;

const CACHE_FILE: &str = "logits.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model: String,
    prompt: String,
    candidates: Vec<String>,
    logits: Vec<f64>,
}

/// Key over (model, prompt, candidates). Independent of which probe asked.
pub fn cache_key(model: &str, query: &LogitQuery) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0x1e]);
    h.update(query.prompt.as_bytes());
    for c in &query.candidates {
        h.update([0x1f]);
        h.update(c.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Safe for concurrent lookups and inserts from the probe runner's workers.
#[derive(Debug)]
pub struct LogitCache {
    entries: RwLock<HashMap<String, Vec<f64>>>,
    file: Mutex<File>,
    path: PathBuf,
}

impl LogitCache {
    /// Opens (creating if needed) the cache under `dir` and loads existing entries.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| DataError::io(&path, e))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| DataError::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn final line from an interrupted run is dropped, anything else is an error.
                let parsed: CacheLine = match serde_json::from_str(&line) {
                    Ok(l) => l,
                    Err(e) if e.is_eof() => {
                        log::warn!("{}:{}: ignoring truncated cache line", path.display(), n + 1);
                        continue;
                    }
                    Err(e) => return Err(DataError::format(&path, n + 1, e.column(), e.to_string())),
                };
                entries.insert(parsed.key, parsed.logits);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| DataError::io(&path, e))?;
        Ok(Self {
            entries: RwLock::new(entries),
            file: Mutex::new(file),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, query: &LogitQuery) -> Option<Vec<f64>> {
        self.entries.read().unwrap().get(&cache_key(model, query)).cloned()
    }

    pub fn insert(&self, model: &str, query: &LogitQuery, logits: &[f64]) -> std::io::Result<()> {
        let key = cache_key(model, query);
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(&key) {
            return Ok(());
        }
        let line = CacheLine {
            key: key.clone(),
            model: model.to_string(),
            prompt: query.prompt.clone(),
            candidates: query.candidates.clone(),
            logits: logits.to_vec(),
        };
        let mut text = serde_json::to_string(&line)?;
        text.push('\n');
        self.file.lock().unwrap().write_all(text.as_bytes())?;
        entries.insert(key, logits.to_vec());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_across_reopen_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let q = LogitQuery::new("p", vec!["a".into(), "b".into()]);
        let values = [0.1 + 0.2, -1.0 / 3.0];
        {
            let cache = LogitCache::open(dir.path()).unwrap();
            cache.insert("m", &q, &values).unwrap();
        }
        let cache = LogitCache::open(dir.path()).unwrap();
        let got = cache.get("m", &q).unwrap();
        assert_eq!(got[0].to_bits(), values[0].to_bits());
        assert_eq!(got[1].to_bits(), values[1].to_bits());
        assert!(cache.get("other", &q).is_none());
    }

    #[test]
    fn key_depends_on_candidate_order() {
        let a = LogitQuery::new("p", vec!["a".into(), "b".into()]);
        let b = LogitQuery::new("p", vec!["b".into(), "a".into()]);
        assert_ne!(cache_key("m", &a), cache_key("m", &b));
    }
}
