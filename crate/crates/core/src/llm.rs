//! LLM-backed document vectors and summaries.
//!
//! Embeddings come either from precomputed JSONL files (one
//! `{"id": ..., "vector": [...]}` object per line, optional
//! `{"model": ..., "dim": ...}` header) or from an OpenAI-style HTTP
//! embedding endpoint. Summarisation routes documents through a chat
//! completion endpoint with a fixed zero-shot prompt before embedding.
//!
//! Every paid or slow call goes through a content-addressed disk cache:
//! the key hashes (model, input text, parameters), entries are written
//! atomically (temp file + rename) and never evicted, so reruns are
//! free and auditable. Transient endpoint failures are retried three
//! times with exponential backoff; HTTP 4xx is treated as a fatal
//! configuration error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Document};
use crate::vectorize::{Provenance, VectorSet};

/// The zero-shot summarisation prompt.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "Write a concise summary of the text. Return your responses with maximum 5 sentences that cover the key points of the text.\n{text}\nSUMMARY:";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("{path} line {line}: {message}")]
    FileFormat {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: no vectors")]
    NoVectors { path: String },
    #[error("{path} line {line}: vector length {got} differs from {expected}")]
    InconsistentDimension {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("embedding id `{0}` missing from corpus")]
    UnknownId(String),
    #[error("no embedding vector for document `{0}`")]
    MissingVector(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("endpoint failure after {attempts} attempts: {message}")]
    Transient { attempts: u32, message: String },
    #[error("endpoint returned malformed response: {0}")]
    BadResponse(String),
    #[error("cache: {0}")]
    Cache(#[source] std::io::Error),
}

impl LlmError {
    /// Fatal errors abort the run; transient ones only fail the cell.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transient { .. })
    }
}

/// An OpenAI-style HTTP endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub url: String,
    pub model_id: String,
    /// Name of the environment variable holding the API key; no
    /// authorization header is sent when absent.
    pub api_key_env: Option<String>,
    pub batch_size: usize,
}

/// Where document vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingSourceKind {
    File { path: PathBuf },
    Http(HttpEndpoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub kind: EmbeddingSourceKind,
    pub model_name: String,
    /// Groups sources for the model-size comparison table
    /// (e.g. "falcon" for falcon-7b and falcon-40b).
    pub family: Option<String>,
}

impl EmbeddingSource {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model_name.is_empty() {
            return Err(LlmError::Config("model_name must not be empty".into()));
        }
        if let EmbeddingSourceKind::Http(endpoint) = &self.kind {
            if endpoint.batch_size < 1 {
                return Err(LlmError::Config("batch_size must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Decode parameters forwarded verbatim to the summarisation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_length: usize,
    pub do_sample: bool,
    pub top_k: usize,
    pub num_return_sequences: usize,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_length: 800,
            do_sample: true,
            top_k: 10,
            num_return_sequences: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummariserConfig {
    pub endpoint: HttpEndpoint,
    /// Whitespace-token budget applied to the document text before it is
    /// substituted into the prompt.
    pub max_input_tokens: usize,
    pub prompt_template: String,
    pub decode: DecodeParams,
}

impl SummariserConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_input_tokens == 0 {
            return Err(LlmError::Config("max_input_tokens must be > 0".into()));
        }
        if self.prompt_template.matches("{text}").count() != 1 {
            return Err(LlmError::Config(
                "prompt_template must contain exactly one {text} placeholder".into(),
            ));
        }
        if self.decode.num_return_sequences < 1 {
            return Err(LlmError::Config(
                "num_return_sequences must be >= 1".into(),
            ));
        }
        if self.decode.do_sample && self.decode.top_k < 1 {
            return Err(LlmError::Config("top_k must be >= 1 when sampling".into()));
        }
        Ok(())
    }

    /// Flags internally contradictory settings that are nevertheless
    /// forwarded as configured (the endpoint owns their semantics).
    pub fn conflict_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.decode.do_sample && self.decode.temperature == 0.0 {
            notes.push(
                "summariser decode params set do_sample=true with temperature=0; \
                 values are forwarded to the endpoint as configured"
                    .to_string(),
            );
        }
        notes
    }
}

/// Cuts `text` at a whitespace-token boundary so that it holds at most
/// `limit` tokens; a text already within the budget is returned
/// unchanged (same bytes, inner whitespace preserved).
pub fn truncate_tokens(text: &str, limit: usize) -> &str {
    assert!(limit > 0, "limit must be > 0");
    let mut count = 0;
    let mut in_token = false;
    for (offset, c) in text.char_indices() {
        if c.is_whitespace() {
            in_token = false;
        } else if !in_token {
            in_token = true;
            count += 1;
            if count > limit {
                return text[..offset].trim_end();
            }
        }
    }
    text
}

// ---------------------------------------------------------------------------
// Embedding files

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: Option<String>,
    vector: Option<Vec<f64>>,
    model: Option<String>,
    dim: Option<usize>,
}

/// Loads a JSONL embedding file. Rows keep the file's order and ids;
/// use [`align_to_corpus`] to reorder them to a corpus.
pub fn load_embeddings_file(path: impl AsRef<Path>) -> Result<VectorSet, LlmError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| LlmError::FileFormat {
        path: display.clone(),
        line: 0,
        message: e.to_string(),
    })?;

    let mut ids: Vec<String> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut model: Option<String> = None;
    let mut declared_dim: Option<usize> = None;
    let mut seen = std::collections::HashSet::new();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let format_err = |message: String| LlmError::FileFormat {
            path: display.clone(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| format_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
        match (record.id, record.vector) {
            (Some(id), Some(vector)) => {
                if vector.is_empty() {
                    return Err(format_err("empty vector".into()));
                }
                if vector.iter().any(|v| !v.is_finite()) {
                    return Err(format_err(format!("non-finite value in vector `{id}`")));
                }
                let expected = declared_dim.unwrap_or_else(|| {
                    vectors.first().map(|v: &Vec<f64>| v.len()).unwrap_or(vector.len())
                });
                if vector.len() != expected {
                    return Err(LlmError::InconsistentDimension {
                        path: display,
                        line: line_no,
                        expected,
                        got: vector.len(),
                    });
                }
                if !seen.insert(id.clone()) {
                    return Err(format_err(format!("duplicate id `{id}`")));
                }
                ids.push(id);
                vectors.push(vector);
            }
            (None, None) if record.model.is_some() || record.dim.is_some() => {
                // optional header line
                model = record.model;
                declared_dim = record.dim;
            }
            _ => return Err(format_err("record needs both `id` and `vector`".into())),
        }
    }

    if vectors.is_empty() {
        return Err(LlmError::NoVectors { path: display });
    }
    let dim = vectors[0].len();
    let flat: Vec<f64> = vectors.into_iter().flatten().collect();
    let matrix = Array2::from_shape_vec((ids.len(), dim), flat).expect("consistent dimensions");
    let model = model.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".into())
    });
    VectorSet::new(matrix, ids, Provenance::External { model })
        .map_err(|e| LlmError::Config(e.to_string()))
}

/// Writes a vector set in the embedding file format, with a header line.
pub fn save_embeddings_file(vectors: &VectorSet, path: impl AsRef<Path>) -> Result<(), LlmError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| LlmError::FileFormat {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    };
    let mut writer = BufWriter::new(File::create(path).map_err(io_err)?);
    let model = match vectors.provenance() {
        Provenance::External { model } => model.clone(),
        Provenance::Tfidf => "tfidf".to_string(),
    };
    writeln!(
        writer,
        "{}",
        serde_json::json!({"model": model, "dim": vectors.dimension()})
    )
    .map_err(io_err)?;
    for (id, row) in vectors.row_ids().iter().zip(vectors.matrix().outer_iter()) {
        let record = serde_json::json!({"id": id, "vector": row.to_vec()});
        writeln!(writer, "{record}").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

/// Reorders file rows to corpus order, matching by id. Ids on either
/// side without a counterpart are fatal.
pub fn align_to_corpus(vectors: &VectorSet, corpus: &Corpus) -> Result<VectorSet, LlmError> {
    let corpus_ids: std::collections::HashSet<&str> =
        corpus.documents().iter().map(|d| d.id.as_str()).collect();
    for id in vectors.row_ids() {
        if !corpus_ids.contains(id.as_str()) {
            return Err(LlmError::UnknownId(id.clone()));
        }
    }
    let row_of: HashMap<&str, usize> = vectors
        .row_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let dim = vectors.dimension();
    let mut matrix = Array2::<f64>::zeros((corpus.len(), dim));
    let mut ids = Vec::with_capacity(corpus.len());
    for (out_row, doc) in corpus.documents().iter().enumerate() {
        let src_row = *row_of
            .get(doc.id.as_str())
            .ok_or_else(|| LlmError::MissingVector(doc.id.clone()))?;
        matrix.row_mut(out_row).assign(&vectors.matrix().row(src_row));
        ids.push(doc.id.clone());
    }
    VectorSet::new(matrix, ids, vectors.provenance().clone())
        .map_err(|e| LlmError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Disk cache

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model: String,
    kind: String,
    created_at: u64,
    value: serde_json::Value,
}

/// Content-addressed JSON cache directory; append-only, atomic writes.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(LlmError::Cache)?;
        Ok(Self { dir })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn get(&self, key: &str) -> Option<serde_json::Value> {
        let data = std::fs::read_to_string(self.path_for(key)).ok()?;
        let record: CacheRecord = serde_json::from_str(&data).ok()?;
        Some(record.value)
    }

    fn put(
        &self,
        key: &str,
        model: &str,
        kind: &str,
        value: serde_json::Value,
    ) -> Result<(), LlmError> {
        let record = CacheRecord {
            key: key.to_string(),
            model: model.to_string(),
            kind: kind.to_string(),
            created_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            value,
        };
        let target = self.path_for(key);
        static WRITE_SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        let seq = WRITE_SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!("{key}.tmp-{}-{seq}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(&record).expect("serializable"))
            .map_err(LlmError::Cache)?;
        std::fs::rename(&tmp, &target).map_err(LlmError::Cache)
    }
}

fn cache_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

// ---------------------------------------------------------------------------
// HTTP client

/// Retry schedule for transient endpoint failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Synchronous LLM client. Requests to one endpoint are issued one at a
/// time; the grid runner parallelizes over clustering cells instead.
pub struct LlmClient {
    agent: ureq::Agent,
    cache: DiskCache,
    retry: RetryPolicy,
}

impl LlmClient {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        Self::with_retry(cache_dir, RetryPolicy::default())
    }

    pub fn with_retry(cache_dir: impl Into<PathBuf>, retry: RetryPolicy) -> Result<Self, LlmError> {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .new_agent();
        Ok(Self {
            agent,
            cache: DiskCache::new(cache_dir)?,
            retry,
        })
    }

    fn api_key(endpoint: &HttpEndpoint) -> Result<Option<String>, LlmError> {
        match &endpoint.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                LlmError::Config(format!("environment variable `{var}` is not set"))
            }),
        }
    }

    /// POSTs `body` with retries. 2xx returns the parsed JSON body; 4xx
    /// is fatal; 5xx and transport errors are retried with exponential
    /// backoff until the attempt budget is exhausted.
    fn post_json(
        &self,
        endpoint: &HttpEndpoint,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, LlmError> {
        let key = Self::api_key(endpoint)?;
        let mut last_error = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            let mut request = self.agent.post(&endpoint.url);
            if let Some(key) = &key {
                request = request.header("authorization", &format!("Bearer {key}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        return response
                            .body_mut()
                            .read_json::<serde_json::Value>()
                            .map_err(|e| LlmError::BadResponse(e.to_string()));
                    }
                    if (400..500).contains(&status) {
                        let detail = response
                            .body_mut()
                            .read_to_string()
                            .unwrap_or_default();
                        return Err(LlmError::Config(format!(
                            "endpoint {} returned {status}: {detail}",
                            endpoint.url
                        )));
                    }
                    last_error = format!("http status {status}");
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
            log::warn!(
                "request to {} failed (attempt {}/{}): {last_error}",
                endpoint.url,
                attempt + 1,
                self.retry.attempts
            );
        }
        Err(LlmError::Transient {
            attempts: self.retry.attempts,
            message: last_error,
        })
    }

    /// Embeds a batch of texts, order preserved. Repeated texts are
    /// served from the cache, so each distinct uncached text is sent at
    /// most once; requests are chunked by the endpoint batch size.
    pub fn embed_batch(
        &self,
        texts: &[String],
        source: &EmbeddingSource,
    ) -> Result<Vec<Vec<f64>>, LlmError> {
        source.validate()?;
        let endpoint = match &source.kind {
            EmbeddingSourceKind::Http(endpoint) => endpoint,
            EmbeddingSourceKind::File { .. } => {
                return Err(LlmError::Config(
                    "embed_batch requires an http embedding source".into(),
                ))
            }
        };
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.is_empty()) {
            return Err(LlmError::Config("cannot embed an empty string".into()));
        }

        let keys: Vec<String> = texts
            .iter()
            .map(|t| cache_key(&["embedding", &source.model_name, &endpoint.model_id, t]))
            .collect();

        let mut resolved: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut pending: Vec<(&String, &String)> = Vec::new(); // (text, key)
        for (text, key) in texts.iter().zip(&keys) {
            if resolved.contains_key(key.as_str()) || pending.iter().any(|(_, k)| *k == key) {
                continue;
            }
            match self.cache.get(key) {
                Some(value) => {
                    let vector: Vec<f64> = serde_json::from_value(value)
                        .map_err(|e| LlmError::BadResponse(format!("corrupt cache entry: {e}")))?;
                    resolved.insert(key.as_str(), vector);
                }
                None => pending.push((text, key)),
            }
        }

        for chunk in pending.chunks(endpoint.batch_size) {
            let inputs: Vec<&str> = chunk.iter().map(|(t, _)| t.as_str()).collect();
            let body = serde_json::json!({"model": endpoint.model_id, "input": inputs});
            let response = self.post_json(endpoint, &body)?;
            let data = response
                .get("data")
                .and_then(|d| d.as_array())
                .ok_or_else(|| LlmError::BadResponse("missing `data` array".into()))?;
            if data.len() != chunk.len() {
                return Err(LlmError::BadResponse(format!(
                    "expected {} embeddings, got {}",
                    chunk.len(),
                    data.len()
                )));
            }
            let mut vectors: Vec<Option<Vec<f64>>> = vec![None; chunk.len()];
            for item in data {
                let index = item
                    .get("index")
                    .and_then(|i| i.as_u64())
                    .ok_or_else(|| LlmError::BadResponse("missing `index`".into()))?
                    as usize;
                let embedding: Vec<f64> = item
                    .get("embedding")
                    .and_then(|e| serde_json::from_value(e.clone()).ok())
                    .ok_or_else(|| LlmError::BadResponse("missing `embedding`".into()))?;
                if index >= chunk.len() || vectors[index].is_some() {
                    return Err(LlmError::BadResponse(format!("bad index {index}")));
                }
                if embedding.iter().any(|v| !v.is_finite()) {
                    return Err(LlmError::BadResponse("non-finite embedding value".into()));
                }
                vectors[index] = Some(embedding);
            }
            for ((_, key), vector) in chunk.iter().zip(vectors) {
                let vector = vector
                    .ok_or_else(|| LlmError::BadResponse("missing embedding index".into()))?;
                self.cache.put(
                    key,
                    &source.model_name,
                    "embedding",
                    serde_json::json!(vector),
                )?;
                resolved.insert(key.as_str(), vector);
            }
        }

        Ok(keys
            .iter()
            .map(|key| resolved[key.as_str()].clone())
            .collect())
    }

    /// Obtains a corpus-aligned vector set from the configured source.
    /// Documents whose text is empty after preprocessing are embedded as
    /// a single space to keep the request valid.
    pub fn embed_corpus(
        &self,
        corpus: &Corpus,
        source: &EmbeddingSource,
    ) -> Result<VectorSet, LlmError> {
        source.validate()?;
        match &source.kind {
            EmbeddingSourceKind::File { path } => {
                let raw = load_embeddings_file(path)?;
                align_to_corpus(&raw, corpus)
            }
            EmbeddingSourceKind::Http(_) => {
                let texts: Vec<String> = corpus
                    .documents()
                    .iter()
                    .map(|d| {
                        if d.text.is_empty() {
                            " ".to_string()
                        } else {
                            d.text.clone()
                        }
                    })
                    .collect();
                let vectors = self.embed_batch(&texts, source)?;
                let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
                let flat: Vec<f64> = vectors.into_iter().flatten().collect();
                let matrix = Array2::from_shape_vec((corpus.len(), dim), flat)
                    .map_err(|e| LlmError::BadResponse(e.to_string()))?;
                let ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
                VectorSet::new(
                    matrix,
                    ids,
                    Provenance::External {
                        model: source.model_name.clone(),
                    },
                )
                .map_err(|e| LlmError::BadResponse(e.to_string()))
            }
        }
    }

    /// Summarises one document: the text is truncated to the token
    /// budget, substituted into the prompt template and sent to the chat
    /// endpoint; the result replaces the text, id and labels stay.
    pub fn summarise(&self, doc: &Document, cfg: &SummariserConfig) -> Result<Document, LlmError> {
        cfg.validate()?;
        let decode_json = serde_json::to_string(&cfg.decode).expect("serializable");
        let key = cache_key(&[
            "summary",
            &cfg.endpoint.model_id,
            &cfg.prompt_template,
            &cfg.max_input_tokens.to_string(),
            &decode_json,
            &doc.text,
        ]);
        let summary = match self.cache.get(&key) {
            Some(value) => serde_json::from_value(value)
                .map_err(|e| LlmError::BadResponse(format!("corrupt cache entry: {e}")))?,
            None => {
                let truncated = truncate_tokens(&doc.text, cfg.max_input_tokens);
                let prompt = cfg.prompt_template.replacen("{text}", truncated, 1);
                let body = serde_json::json!({
                    "model": cfg.endpoint.model_id,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": cfg.decode.temperature,
                    "max_tokens": cfg.decode.max_length,
                    "do_sample": cfg.decode.do_sample,
                    "top_k": cfg.decode.top_k,
                    "num_return_sequences": cfg.decode.num_return_sequences,
                });
                let response = self.post_json(&cfg.endpoint, &body)?;
                let summary = response
                    .get("choices")
                    .and_then(|c| c.get(0))
                    .and_then(|c| c.get("message"))
                    .and_then(|m| m.get("content"))
                    .and_then(|c| c.as_str())
                    .ok_or_else(|| {
                        LlmError::BadResponse("missing choices[0].message.content".into())
                    })?
                    .to_string();
                self.cache.put(
                    &key,
                    &cfg.endpoint.model_id,
                    "summary",
                    serde_json::json!(summary),
                )?;
                summary
            }
        };
        Ok(Document {
            id: doc.id.clone(),
            text: summary,
            label: doc.label.clone(),
            label2: doc.label2.clone(),
        })
    }

    /// Summarises a whole corpus. Per-document endpoint failures fall
    /// back to the original text; the ids of those documents are
    /// returned so the run report can flag them as unsummarised.
    pub fn summarise_corpus(
        &self,
        corpus: &Corpus,
        cfg: &SummariserConfig,
    ) -> Result<(Corpus, Vec<String>), LlmError> {
        cfg.validate()?;
        let mut documents = Vec::with_capacity(corpus.len());
        let mut unsummarised = Vec::new();
        for doc in corpus.documents() {
            match self.summarise(doc, cfg) {
                Ok(summary) => documents.push(summary),
                Err(e) if e.is_transient() => {
                    log::warn!("document `{}` left unsummarised: {e}", doc.id);
                    unsummarised.push(doc.id.clone());
                    documents.push(doc.clone());
                }
                Err(e) => return Err(e),
            }
        }
        let corpus = Corpus::new(corpus.name(), documents)
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok((corpus, unsummarised))
    }
}
