use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{ChatMessage, ChatOracle, ChatReply, ChatRequest, OracleError, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Serve hits, forward misses and record them.
    ReadWrite,
    /// Serve hits; a miss is an error.
    ReplayOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub key: String,
    pub kind: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub sample: u64,
    pub response: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// One JSON file per exchange, named by the hex SHA-256 of the request.
pub struct ExchangeCache {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl ExchangeCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, OracleError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| OracleError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ExchangeCache {
            dir,
            lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content hash over endpoint kind, model, messages, temperature and
    /// sample index.
    pub fn key(kind: &str, request: &ChatRequest) -> String {
        let canonical = json!({
            "kind": kind,
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "sample": request.sample,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ExchangeRecord>, OracleError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.path(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| OracleError::Cache(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(OracleError::Cache(format!("{}: {e}", path.display()))),
        }
    }

    /// Writes via a temporary file and rename so readers never see a
    /// partial entry.
    pub fn put(&self, record: &ExchangeRecord) -> Result<(), OracleError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.path(&record.key);
        let tmp = self.dir.join(format!(".{}.tmp", record.key));
        let text = serde_json::to_string_pretty(record).map_err(|e| OracleError::Cache(e.to_string()))?;
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| OracleError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(|e| e.ok())
                    .filter(|e| {
                        let name = e.file_name();
                        let name = name.to_string_lossy();
                        name.ends_with(".json") && !name.starts_with('.')
                    })
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Chat oracle backed by an [`ExchangeCache`]. Cached replies carry the
/// recorded latency and attempt count so replays are byte-identical.
pub struct CachedChat {
    cache: ExchangeCache,
    inner: Option<Arc<dyn ChatOracle>>,
    mode: CacheMode,
}

impl CachedChat {
    pub fn new(cache: ExchangeCache, inner: Arc<dyn ChatOracle>) -> Self {
        CachedChat {
            cache,
            inner: Some(inner),
            mode: CacheMode::ReadWrite,
        }
    }

    pub fn replay_only(cache: ExchangeCache) -> Self {
        CachedChat {
            cache,
            inner: None,
            mode: CacheMode::ReplayOnly,
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn cache(&self) -> &ExchangeCache {
        &self.cache
    }
}

impl ChatOracle for CachedChat {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError> {
        request.validate()?;
        let key = ExchangeCache::key("chat", request);
        if let Some(rec) = self.cache.get(&key)? {
            return Ok(ChatReply {
                text: rec.response,
                usage: rec.usage,
                latency_ms: rec.latency_ms,
                attempts: rec.attempts,
                cached: true,
            });
        }
        let inner = match (&self.inner, self.mode) {
            (Some(inner), CacheMode::ReadWrite) => inner,
            _ => return Err(OracleError::CacheMiss(key)),
        };
        let reply = inner.chat(request)?;
        self.cache.put(&ExchangeRecord {
            key,
            kind: "chat".into(),
            model: request.model.clone(),
            messages: request.messages.clone(),
            temperature: request.temperature,
            sample: request.sample,
            response: reply.text.clone(),
            usage: reply.usage,
            latency_ms: reply.latency_ms,
            attempts: reply.attempts,
        })?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        calls: AtomicUsize,
    }

    impl ChatOracle for Counting {
        fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(ChatReply {
                text: format!("reply {n} to {}", request.messages.last().unwrap().content),
                usage: Usage::default(),
                latency_ms: 17,
                attempts: 2,
                cached: false,
            })
        }
    }

    fn req(content: &str) -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::user(content)], 0.0)
    }

    #[test]
    fn hit_returns_recorded_reply() {
        let dir = tempfile::tempdir().unwrap();
        let inner = Arc::new(Counting {
            calls: AtomicUsize::new(0),
        });
        let chat = CachedChat::new(ExchangeCache::open(dir.path()).unwrap(), inner.clone());
        let a = chat.chat(&req("q")).unwrap();
        let b = chat.chat(&req("q")).unwrap();
        assert_eq!(inner.calls.load(Ordering::SeqCst), 1);
        assert_eq!(a.text, b.text);
        assert!(b.cached);
        assert_eq!((b.latency_ms, b.attempts), (17, 2));

        let replay = CachedChat::replay_only(ExchangeCache::open(dir.path()).unwrap());
        assert_eq!(replay.chat(&req("q")).unwrap().text, a.text);
        assert_eq!(replay.chat(&req("other")).unwrap_err().kind(), "cache_miss");
    }

    #[test]
    fn every_field_changes_key() {
        let base = req("q");
        let k = ExchangeCache::key("chat", &base);
        let mut r = base.clone();
        r.model = "m2".into();
        assert_ne!(ExchangeCache::key("chat", &r), k);
        let mut r = base.clone();
        r.temperature = 1.0;
        assert_ne!(ExchangeCache::key("chat", &r), k);
        let mut r = base.clone();
        r.messages.push(ChatMessage::assistant("x"));
        assert_ne!(ExchangeCache::key("chat", &r), k);
        assert_ne!(ExchangeCache::key("chat", &base.clone().with_sample(1)), k);
        assert_ne!(ExchangeCache::key("embed", &base), k);
        assert_eq!(ExchangeCache::key("chat", &base), k);
    }

    #[test]
    fn concurrent_writers_leave_whole_files() {
        let dir = tempfile::tempdir().unwrap();
        let chat = Arc::new(CachedChat::new(
            ExchangeCache::open(dir.path()).unwrap(),
            Arc::new(Counting {
                calls: AtomicUsize::new(0),
            }),
        ));
        std::thread::scope(|s| {
            for t in 0..8 {
                let chat = chat.clone();
                s.spawn(move || {
                    for i in 0..20 {
                        chat.chat(&req(&format!("q{}", (t + i) % 25))).unwrap();
                    }
                });
            }
        });
        let cache = ExchangeCache::open(dir.path()).unwrap();
        assert_eq!(cache.len(), 25);
        for i in 0..25 {
            let key = ExchangeCache::key("chat", &req(&format!("q{i}")));
            assert!(cache.get(&key).unwrap().is_some());
        }
    }
}
