use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HttpChatClient, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    pub text: String,
    pub vector: Vec<f64>,
    pub dimension: usize,
}

pub trait EmbeddingProvider: Send + Sync {
    /// Identifier that separates cache entries of different providers.
    fn name(&self) -> String;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, OracleError>;
}

/// Hex SHA-256 of the UTF-8 text; the key of precomputed embedding files.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub struct HttpEmbedder {
    client: Arc<HttpChatClient>,
    model: String,
}

impl HttpEmbedder {
    pub fn new(client: Arc<HttpChatClient>, model: impl Into<String>) -> Self {
        HttpEmbedder {
            client,
            model: model.into(),
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> String {
        format!("http:{}:{}", self.client.base_url(), self.model)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, OracleError> {
        self.client.embed_raw(&self.model, texts)
    }
}

/// Vectors loaded from a JSON object mapping [`text_hash`] to an array.
pub struct PrecomputedEmbeddings {
    source: String,
    vectors: HashMap<String, Vec<f64>>,
}

impl PrecomputedEmbeddings {
    pub fn from_map(source: impl Into<String>, vectors: HashMap<String, Vec<f64>>) -> Self {
        PrecomputedEmbeddings {
            source: source.into(),
            vectors,
        }
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = fs::read_to_string(path)
            .map_err(|e| OracleError::NotConfigured(format!("embedding file {}: {e}", path.display())))?;
        let vectors: HashMap<String, Vec<f64>> = serde_json::from_str(&text)
            .map_err(|e| OracleError::Malformed(format!("embedding file {}: {e}", path.display())))?;
        Ok(Self::from_map(path.display().to_string(), vectors))
    }

    /// Builds a file body for `texts` using another provider.
    pub fn export(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<HashMap<String, Vec<f64>>, OracleError> {
        let vectors = provider.embed(texts)?;
        Ok(texts.iter().map(|t| text_hash(t)).zip(vectors).collect())
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn name(&self) -> String {
        format!("file:{}", self.source)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, OracleError> {
        texts
            .iter()
            .map(|t| {
                let h = text_hash(t);
                self.vectors
                    .get(&h)
                    .cloned()
                    .ok_or_else(|| OracleError::CacheMiss(format!("no precomputed embedding for {h}")))
            })
            .collect()
    }
}

/// Offline feature-hashing embedding over lowercase words and character
/// trigrams. Texts sharing vocabulary get high cosine similarity.
#[derive(Debug, Clone, Copy)]
pub struct HashedEmbeddings {
    pub dimension: usize,
}

impl HashedEmbeddings {
    pub fn new(dimension: usize) -> Self {
        HashedEmbeddings { dimension }
    }

    fn add_feature(&self, v: &mut [f64], feature: &str, weight: f64) {
        let digest = Sha256::digest(feature.as_bytes());
        let mut idx = [0u8; 8];
        idx.copy_from_slice(&digest[..8]);
        let slot = (u64::from_le_bytes(idx) % self.dimension as u64) as usize;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[slot] += sign * weight;
    }

    fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        let words: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        for w in &words {
            self.add_feature(&mut v, &format!("w:{w}"), 1.0);
            let chars: Vec<char> = format!(" {w} ").chars().collect();
            for tri in chars.windows(3) {
                let tri: String = tri.iter().collect();
                self.add_feature(&mut v, &format!("c:{tri}"), 0.5);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashedEmbeddings {
    fn name(&self) -> String {
        format!("hashed:{}", self.dimension)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, OracleError> {
        if self.dimension == 0 {
            return Err(OracleError::NotConfigured("hashed embedding dimension must be positive".into()));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct StoredVector {
    provider: String,
    text: String,
    vector: Vec<f64>,
}

/// Session wrapper: caches vectors by text hash (in memory and optionally
/// on disk) and enforces one dimension for the whole session.
pub struct CachedEmbedder {
    provider: Arc<dyn EmbeddingProvider>,
    memory: Mutex<HashMap<String, Vec<f64>>>,
    dir: Option<PathBuf>,
    dimension: Mutex<Option<usize>>,
}

impl CachedEmbedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        CachedEmbedder {
            provider,
            memory: Mutex::new(HashMap::new()),
            dir: None,
            dimension: Mutex::new(None),
        }
    }

    pub fn with_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self, OracleError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| OracleError::Cache(format!("{}: {e}", dir.display())))?;
        self.dir = Some(dir);
        Ok(self)
    }

    pub fn dimension(&self) -> Option<usize> {
        *self.dimension.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn key(&self, text: &str) -> String {
        text_hash(&format!("{}\u{0}{text}", self.provider.name()))
    }

    fn disk_get(&self, key: &str) -> Option<Vec<f64>> {
        let path = self.dir.as_ref()?.join(format!("emb-{key}.json"));
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str::<StoredVector>(&text).ok().map(|s| s.vector)
    }

    fn disk_put(&self, key: &str, text: &str, vector: &[f64]) -> Result<(), OracleError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("emb-{key}.json"));
        let tmp = dir.join(format!(".emb-{key}.tmp"));
        let body = serde_json::to_string(&StoredVector {
            provider: self.provider.name(),
            text: text.to_string(),
            vector: vector.to_vec(),
        })
        .map_err(|e| OracleError::Cache(e.to_string()))?;
        fs::write(&tmp, body)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| OracleError::Cache(format!("{}: {e}", path.display())))
    }

    fn check_dimension(&self, got: usize) -> Result<(), OracleError> {
        let mut dim = self.dimension.lock().unwrap_or_else(|e| e.into_inner());
        match *dim {
            None if got == 0 => Err(OracleError::Integrity("empty embedding vector".into())),
            None => {
                *dim = Some(got);
                Ok(())
            }
            Some(d) if d == got => Ok(()),
            Some(d) => Err(OracleError::Integrity(format!(
                "embedding dimension changed from {d} to {got} within a session"
            ))),
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingResult>, OracleError> {
        if texts.is_empty() {
            return Err(OracleError::NotConfigured("no texts to embed".into()));
        }
        let keys: Vec<String> = texts.iter().map(|t| self.key(t)).collect();
        let mut found: Vec<Option<Vec<f64>>> = {
            let mem = self.memory.lock().unwrap_or_else(|e| e.into_inner());
            keys.iter().map(|k| mem.get(k).cloned()).collect()
        };
        for (slot, key) in found.iter_mut().zip(&keys) {
            if slot.is_none() {
                *slot = self.disk_get(key);
            }
        }
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| found[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.provider.embed(&batch)?;
            if vectors.len() != batch.len() {
                return Err(OracleError::Malformed(format!(
                    "{} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            for (&i, v) in missing.iter().zip(vectors) {
                self.disk_put(&keys[i], &texts[i], &v)?;
                found[i] = Some(v);
            }
        }
        let mut out = Vec::with_capacity(texts.len());
        let mut mem = self.memory.lock().unwrap_or_else(|e| e.into_inner());
        for ((text, key), v) in texts.iter().zip(&keys).zip(found) {
            let vector = v.expect("all slots filled");
            self.check_dimension(vector.len())?;
            mem.insert(key.clone(), vector.clone());
            out.push(EmbeddingResult {
                text: text.clone(),
                dimension: vector.len(),
                vector,
            });
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingResult, OracleError> {
        Ok(self.embed(&[text.to_string()])?.remove(0))
    }
}
