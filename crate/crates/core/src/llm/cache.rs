use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub endpoint: String,
    pub trial: u32,
    /// Seconds since the Unix epoch at first write.
    pub timestamp: u64,
    pub request: LlmRequest,
    pub response_text: String,
}

impl CacheEntry {
    pub fn new(key: String, endpoint: &str, request: &LlmRequest, trial: u32, response_text: String) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        CacheEntry {
            key,
            endpoint: endpoint.to_string(),
            trial,
            timestamp,
            request: request.clone(),
            response_text,
        }
    }
}

/// Directory of `<hex key>.json` files.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| cache_error(&dir, e))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_error(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| cache_error(&path, e))?;
        Ok(Some(entry))
    }

    /// Atomic: concurrent writers of the same key leave one complete file.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), LlmError> {
        let path = self.entry_path(&entry.key);
        let bytes = serde_json::to_vec_pretty(entry).map_err(|e| cache_error(&path, e))?;
        super::write_atomic(&path, &bytes).map_err(|e| cache_error(&path, e))
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|ext| ext == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn cache_error(path: &Path, err: impl std::fmt::Display) -> LlmError {
    LlmError::Cache {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{cache_key, RequestTemplate};

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("nested")).unwrap();
        let req = RequestTemplate::new("m").request("p");
        let key = cache_key(&req, 0);
        assert!(cache.get(&key).unwrap().is_none());
        cache.put(&CacheEntry::new(key.clone(), "ep", &req, 0, "answer\n".into())).unwrap();
        let entry = cache.get(&key).unwrap().unwrap();
        assert_eq!(entry.response_text, "answer\n");
        assert_eq!(entry.endpoint, "ep");
        assert_eq!(cache.len(), 1);
        assert!(dir.path().join("nested").join(format!("{key}.json")).exists());
    }
}
