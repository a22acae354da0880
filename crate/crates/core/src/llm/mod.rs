//! Chat-completion access: request model, content-addressed response cache,
//! HTTP backend with retry, scripted mocks and bounded-concurrency batches.

mod batch;
mod cache;
mod http;
mod mock;
mod request;

use std::path::Path;

pub use batch::{parallel_map, run_batch, BatchOutcome};
pub use cache::{CacheEntry, ResponseCache};
pub use http::{HttpBackend, RetryPolicy, API_KEY_ENV};
pub use mock::{FnClient, ScriptLine, ScriptedClient};
pub use request::{cache_key, sha256_hex, LlmRequest, Message, RequestTemplate, Role};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("endpoint returned {status}: {body}")]
    Client { status: u16, body: String },

    #[error("endpoint failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },

    #[error("replay cache has no entry {key}")]
    ReplayMiss { key: String },

    #[error("no scripted response for prompt sha256 {prompt_sha256}")]
    ScriptMiss { prompt_sha256: String },

    #[error("malformed endpoint response: {0}")]
    Decode(String),

    #[error("cache error on {path}: {message}")]
    Cache { path: String, message: String },

    #[error("{0}")]
    Config(String),
}

/// Anything that can answer a chat-completion request.
///
/// `trial` distinguishes repeated generations of the same request; backends
/// that talk to a live endpoint ignore it, caches key on it.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &LlmRequest, trial: u32) -> Result<String, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn complete(&self, request: &LlmRequest, trial: u32) -> Result<String, LlmError> {
        (**self).complete(request, trial)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Box<T> {
    fn complete(&self, request: &LlmRequest, trial: u32) -> Result<String, LlmError> {
        (**self).complete(request, trial)
    }
}

/// Cache-first client. On a miss the backend is called and the answer
/// stored; in replay-only mode (or without a backend) a miss is an error.
pub struct CachedClient {
    endpoint: String,
    cache: ResponseCache,
    backend: Option<Box<dyn ChatClient>>,
    replay_only: bool,
}

impl CachedClient {
    pub fn new(endpoint: impl Into<String>, cache: ResponseCache, backend: Box<dyn ChatClient>) -> Self {
        CachedClient {
            endpoint: endpoint.into(),
            cache,
            backend: Some(backend),
            replay_only: false,
        }
    }

    pub fn replay(endpoint: impl Into<String>, cache: ResponseCache) -> Self {
        CachedClient {
            endpoint: endpoint.into(),
            cache,
            backend: None,
            replay_only: true,
        }
    }

    pub fn replay_only(mut self, replay_only: bool) -> Self {
        self.replay_only = replay_only;
        self
    }
}

impl ChatClient for CachedClient {
    fn complete(&self, request: &LlmRequest, trial: u32) -> Result<String, LlmError> {
        let key = cache_key(request, trial);
        if let Some(entry) = self.cache.get(&key)? {
            return Ok(entry.response_text);
        }
        let backend = match (&self.backend, self.replay_only) {
            (Some(backend), false) => backend,
            _ => return Err(LlmError::ReplayMiss { key }),
        };
        let text = backend.complete(request, trial)?;
        self.cache.put(&CacheEntry::new(key, &self.endpoint, request, trial, text.clone()))?;
        Ok(text)
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| crate::Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| crate::Error::io(path, e))?;
    tmp.persist(path).map_err(|e| crate::Error::io(path, e.error))?;
    Ok(())
}
