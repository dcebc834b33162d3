//! Content-addressed archive of backend responses.
//!
//! Each request is keyed by `sha256(label, operation, context hash,
//! argument)`. The cache is an append-only JSONL file; when a key occurs
//! more than once the first line wins, so retries never alter a recorded
//! result.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BackendError, GenerationResult, ScoringBackend, ScoringContext, TokenLosses};
use crate::hash::sha256_fields;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Call the backend, do not touch the cache.
    #[default]
    Live,
    /// Serve cached responses, call and record on a miss.
    Record,
    /// Serve only from the cache; a miss is an error.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub operation: String,
    pub context_hash: String,
    pub argument: String,
    pub response: serde_json::Value,
}

#[derive(Debug, Default)]
pub struct ReplayCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, ReplayRecord>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) a JSONL cache file.
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ReplayRecord = serde_json::from_str(&line)
                    .map_err(|e| BackendError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))?;
                entries.entry(rec.key.clone()).or_insert(rec);
            }
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| BackendError::Cache(format!("{}: {e}", dir.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
        Ok(Self { path: Some(path.to_path_buf()), entries: RwLock::new(entries), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<ReplayRecord> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Insert unless the key is already present. Returns the stored record,
    /// which is the earlier one on a collision.
    pub fn put(&self, rec: ReplayRecord) -> Result<ReplayRecord, BackendError> {
        let mut map = self.entries.write().expect("cache lock");
        if let Some(existing) = map.get(&rec.key) {
            return Ok(existing.clone());
        }
        let mut w = self.writer.lock().expect("cache writer lock");
        if let Some(f) = w.as_mut() {
            let mut line = serde_json::to_string(&rec).map_err(|e| BackendError::Cache(e.to_string()))?;
            line.push('\n');
            f.write_all(line.as_bytes()).map_err(|e| BackendError::Cache(e.to_string()))?;
            f.flush().map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        map.insert(rec.key.clone(), rec.clone());
        Ok(rec)
    }
}

pub fn request_key(label: &str, operation: &str, context_hash: &str, argument: &str) -> String {
    sha256_fields([label.as_bytes(), operation.as_bytes(), context_hash.as_bytes(), argument.as_bytes()])
}

/// Wraps a backend with a [`ReplayCache`].
pub struct ReplayBackend<B> {
    inner: Option<B>,
    cache: std::sync::Arc<ReplayCache>,
    mode: CacheMode,
    label: String,
    scoring: bool,
    budget: usize,
}

impl<B: ScoringBackend> ReplayBackend<B> {
    pub fn new(inner: B, cache: std::sync::Arc<ReplayCache>, mode: CacheMode, label: impl Into<String>) -> Self {
        let scoring = inner.supports_scoring();
        let budget = inner.max_budget();
        Self { inner: Some(inner), cache, mode, label: label.into(), scoring, budget }
    }
}

impl ReplayBackend<super::MockBackend> {
    /// Cache-only backend with no live endpoint behind it.
    pub fn replay_only(cache: std::sync::Arc<ReplayCache>, label: impl Into<String>, supports_scoring: bool) -> Self {
        Self {
            inner: None,
            cache,
            mode: CacheMode::Replay,
            label: label.into(),
            scoring: supports_scoring,
            budget: super::DEFAULT_BUDGET,
        }
    }
}

impl<B: ScoringBackend> ReplayBackend<B> {
    fn cached<T, F>(&self, operation: &str, ctx: &ScoringContext, argument: &str, call: F) -> Result<T, BackendError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce(&B) -> Result<T, BackendError>,
    {
        let ctx_hash = ctx.content_hash();
        let key = request_key(&self.label, operation, &ctx_hash, argument);
        let decode = |rec: ReplayRecord| {
            serde_json::from_value::<T>(rec.response).map_err(|e| BackendError::Cache(format!("record {key}: {e}")))
        };
        if self.mode != CacheMode::Live {
            if let Some(rec) = self.cache.get(&key) {
                return decode(rec);
            }
            if self.mode == CacheMode::Replay {
                return Err(BackendError::ReplayMiss { key });
            }
        }
        let inner = self.inner.as_ref().ok_or_else(|| BackendError::ReplayMiss { key: key.clone() })?;
        let value = call(inner)?;
        if self.mode == CacheMode::Record {
            let response = serde_json::to_value(&value).map_err(|e| BackendError::Cache(e.to_string()))?;
            let stored = self.cache.put(ReplayRecord {
                key: key.clone(),
                operation: operation.to_string(),
                context_hash: ctx_hash,
                argument: argument.to_string(),
                response,
            })?;
            return decode(stored);
        }
        Ok(value)
    }
}

impl<B: ScoringBackend> ScoringBackend for ReplayBackend<B> {
    fn name(&self) -> &str {
        &self.label
    }

    fn max_budget(&self) -> usize {
        self.budget
    }

    fn supports_scoring(&self) -> bool {
        self.scoring
    }

    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError> {
        self.cached("generate", ctx, &budget.to_string(), |b| b.generate(ctx, budget))
    }

    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError> {
        super::check_score_request(continuation)?;
        if !self.scoring {
            return Err(BackendError::Capability {
                backend: self.label.clone(),
                reason: "backend does not return continuation log-probabilities".into(),
            });
        }
        self.cached("score", ctx, continuation, |b| b.score_continuation(ctx, continuation))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::backend::{FinishReason, LossRule, MockBackend, MockSpec, TokenUsage};

    struct Flaky {
        calls: AtomicUsize,
    }

    impl ScoringBackend for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn supports_scoring(&self) -> bool {
            true
        }
        fn generate(&self, _: &ScoringContext, _: usize) -> Result<GenerationResult, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(GenerationResult {
                text: format!("call {n}"),
                finish_reason: FinishReason::Stop,
                usage: TokenUsage::default(),
            })
        }
        fn score_continuation(&self, _: &ScoringContext, c: &str) -> Result<TokenLosses, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            TokenLosses::new(vec![n as f64 + 1.0; c.chars().count()])
        }
    }

    #[test]
    fn first_response_wins() {
        let cache = Arc::new(ReplayCache::in_memory());
        let b = ReplayBackend::new(Flaky { calls: AtomicUsize::new(0) }, cache.clone(), CacheMode::Record, "f");
        let ctx = ScoringContext::text("q");
        let first = b.generate(&ctx, 10).unwrap();
        assert_eq!(first, b.generate(&ctx, 10).unwrap());
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn replay_from_file_matches_live() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.jsonl");
        let spec = MockSpec { scoring: Some(LossRule::Hash { seed: 1, min: 0.0, max: 5.0 }), ..MockSpec::default() };
        let ctx = ScoringContext::text("What is 12 × 3?");
        let live = {
            let cache = Arc::new(ReplayCache::open(&path).unwrap());
            let b = ReplayBackend::new(MockBackend::new(spec), cache, CacheMode::Record, "mock");
            (b.score_continuation(&ctx, "Column method").unwrap(), b.generate(&ctx, 100).unwrap())
        };
        let cache = Arc::new(ReplayCache::open(&path).unwrap());
        let r = ReplayBackend::replay_only(cache, "mock", true);
        assert_eq!(r.score_continuation(&ctx, "Column method").unwrap(), live.0);
        assert_eq!(r.generate(&ctx, 100).unwrap(), live.1);
        assert!(matches!(r.generate(&ctx, 99), Err(BackendError::ReplayMiss { .. })));
    }

    #[test]
    fn duplicate_lines_keep_first() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mk = |v: u32| ReplayRecord {
            key: "k".into(),
            operation: "generate".into(),
            context_hash: "h".into(),
            argument: "1".into(),
            response: serde_json::json!(v),
        };
        let lines = [mk(1), mk(2)].map(|r| serde_json::to_string(&r).unwrap()).join("\n");
        std::fs::write(&path, lines).unwrap();
        let c = ReplayCache::open(&path).unwrap();
        assert_eq!(c.get("k").unwrap().response, serde_json::json!(1));
    }
}
