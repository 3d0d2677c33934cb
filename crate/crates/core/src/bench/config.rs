//! TOML experiment configuration: the (dataset x embedding x algorithm
//! [x summarisation]) grid with all seeds and parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{Algorithm, ClusterParams, KmeansInit};
use crate::corpus::{CorpusFormat, LabelLevel};
use crate::evaluate::MappingStrategy;
use crate::llm::{
    DecodeParams, EmbeddingSource, EmbeddingSourceKind, HttpEndpoint, SummariserConfig,
    DEFAULT_PROMPT_TEMPLATE,
};
use crate::vectorize::TfidfConfig;

use super::BenchError;

/// Run-wide settings (all optional in the file).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// Worker threads for clustering cells; 0 means one per physical core.
    pub parallelism: usize,
    pub mapping: MappingStrategy,
    /// When set, replaces the seed of every algorithm in the grid.
    pub seed_override: Option<u64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("bench-run"),
            cache_dir: PathBuf::from(".bench-cache"),
            parallelism: 0,
            mapping: MappingStrategy::NearestCentroid,
            seed_override: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_label_level", deserialize_with = "level_from_int", serialize_with = "level_to_int")]
    pub label_level: LabelLevel,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_label_level() -> LabelLevel {
    LabelLevel::One
}

fn level_from_int<'de, D: serde::Deserializer<'de>>(d: D) -> Result<LabelLevel, D::Error> {
    match u8::deserialize(d)? {
        1 => Ok(LabelLevel::One),
        2 => Ok(LabelLevel::Two),
        other => Err(serde::de::Error::custom(format!(
            "label_level must be 1 or 2, got {other}"
        ))),
    }
}

fn level_to_int<S: serde::Serializer>(level: &LabelLevel, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(match level {
        LabelLevel::One => 1,
        LabelLevel::Two => 2,
    })
}

/// One embedding column of the grid.
#[derive(Debug, Clone)]
pub struct EmbeddingSpec {
    pub name: String,
    pub kind: EmbeddingKind,
    pub family: Option<String>,
}

#[derive(Debug, Clone)]
pub enum EmbeddingKind {
    Tfidf(TfidfConfig),
    External(EmbeddingSourceTemplate),
}

/// External source whose file path may contain a `{dataset}` placeholder
/// substituted per dataset.
#[derive(Debug, Clone)]
pub struct EmbeddingSourceTemplate {
    pub kind: EmbeddingSourceKind,
    pub model_name: String,
    pub family: Option<String>,
}

impl EmbeddingSourceTemplate {
    /// Resolves the `{dataset}` placeholder for a concrete dataset.
    pub fn resolve(&self, dataset: &str) -> EmbeddingSource {
        let kind = match &self.kind {
            EmbeddingSourceKind::File { path } => EmbeddingSourceKind::File {
                path: PathBuf::from(
                    path.to_string_lossy().replace("{dataset}", dataset),
                ),
            },
            http => http.clone(),
        };
        EmbeddingSource {
            kind,
            model_name: self.model_name.clone(),
            family: self.family.clone(),
        }
    }
}

/// One clustering algorithm with optional parameter overrides; anything
/// unset falls back to the benchmark defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<KmeansInit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxiter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_cap: Option<usize>,
}

impl AlgorithmSpec {
    pub fn of(kind: Algorithm) -> Self {
        Self {
            kind,
            seed: None,
            init: None,
            n_init: None,
            max_iter: None,
            tol: None,
            m: None,
            error: None,
            maxiter: None,
            gamma: None,
            dense_cap: None,
        }
    }

    /// Full parameter set for a dataset whose class count fixes k.
    pub fn params_for(&self, k: usize, seed_override: Option<u64>) -> ClusterParams {
        let mut params = ClusterParams::new(self.kind, k);
        if let Some(seed) = self.seed {
            params.seed = seed;
        }
        if let Some(seed) = seed_override {
            params.seed = seed;
        }
        if let Some(init) = self.init {
            params.kmeans.init = init;
        }
        if let Some(n_init) = self.n_init {
            params.kmeans.n_init = n_init;
        }
        if let Some(max_iter) = self.max_iter {
            params.kmeans.max_iter = max_iter;
        }
        if let Some(tol) = self.tol {
            params.kmeans.tol = tol;
        }
        if let Some(m) = self.m {
            params.fuzzy.m = m;
        }
        if let Some(error) = self.error {
            params.fuzzy.error = error;
        }
        if let Some(maxiter) = self.maxiter {
            params.fuzzy.max_iter = maxiter;
        }
        if let Some(gamma) = self.gamma {
            params.spectral.gamma = gamma;
        }
        if let Some(cap) = self.dense_cap {
            params.spectral.dense_cap = cap;
        }
        params
    }
}

/// The whole experiment grid.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub run: RunSettings,
    pub datasets: Vec<DatasetSpec>,
    pub embeddings: Vec<EmbeddingSpec>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub summarise: Option<SummariserConfig>,
    /// Original TOML text, copied into the run directory.
    pub source_text: String,
}

// raw deserialization targets -----------------------------------------------

#[derive(Deserialize)]
struct RawConfig {
    #[serde(default)]
    run: Option<RunSettings>,
    #[serde(default)]
    dataset: Vec<DatasetSpec>,
    #[serde(default)]
    embedding: Vec<RawEmbedding>,
    #[serde(default)]
    algorithm: Vec<AlgorithmSpec>,
    #[serde(default)]
    summarise: Option<RawSummarise>,
}

#[derive(Deserialize)]
struct RawEmbedding {
    name: String,
    kind: String,
    #[serde(default)]
    family: Option<String>,
    // tfidf
    #[serde(default)]
    min_df: Option<usize>,
    #[serde(default)]
    max_df: Option<f64>,
    #[serde(default)]
    max_features: Option<usize>,
    // file
    #[serde(default)]
    path: Option<PathBuf>,
    // http
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    model_id: Option<String>,
    #[serde(default)]
    api_key_env: Option<String>,
    #[serde(default)]
    batch_size: Option<usize>,
}

#[derive(Deserialize)]
struct RawSummarise {
    url: String,
    model_id: String,
    #[serde(default)]
    api_key_env: Option<String>,
    max_input_tokens: usize,
    #[serde(default)]
    prompt_template: Option<String>,
    #[serde(default)]
    decode: Option<DecodeParams>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        let config = Self::from_raw(raw, text.to_string())?;
        config.validate()?;
        Ok(config)
    }

    fn from_raw(raw: RawConfig, source_text: String) -> Result<Self, BenchError> {
        let mut embeddings = Vec::with_capacity(raw.embedding.len());
        for e in raw.embedding {
            let kind = match e.kind.as_str() {
                "tfidf" => {
                    let defaults = TfidfConfig::default();
                    EmbeddingKind::Tfidf(TfidfConfig {
                        min_df: e.min_df.unwrap_or(defaults.min_df),
                        max_df: e.max_df.unwrap_or(defaults.max_df),
                        max_features: e.max_features.unwrap_or(defaults.max_features),
                    })
                }
                "file" => {
                    let path = e.path.ok_or_else(|| {
                        BenchError::Config(format!("embedding `{}`: missing `path`", e.name))
                    })?;
                    EmbeddingKind::External(EmbeddingSourceTemplate {
                        kind: EmbeddingSourceKind::File { path },
                        model_name: e.name.clone(),
                        family: e.family.clone(),
                    })
                }
                "http" => {
                    let url = e.url.ok_or_else(|| {
                        BenchError::Config(format!("embedding `{}`: missing `url`", e.name))
                    })?;
                    let model_id = e.model_id.ok_or_else(|| {
                        BenchError::Config(format!("embedding `{}`: missing `model_id`", e.name))
                    })?;
                    EmbeddingKind::External(EmbeddingSourceTemplate {
                        kind: EmbeddingSourceKind::Http(HttpEndpoint {
                            url,
                            model_id,
                            api_key_env: e.api_key_env,
                            batch_size: e.batch_size.unwrap_or(32),
                        }),
                        model_name: e.name.clone(),
                        family: e.family.clone(),
                    })
                }
                other => {
                    return Err(BenchError::Config(format!(
                        "embedding `{}`: unknown kind `{other}` (expected tfidf, file or http)",
                        e.name
                    )))
                }
            };
            embeddings.push(EmbeddingSpec {
                name: e.name,
                kind,
                family: e.family,
            });
        }

        let summarise = raw.summarise.map(|s| SummariserConfig {
            endpoint: HttpEndpoint {
                url: s.url,
                model_id: s.model_id,
                api_key_env: s.api_key_env,
                batch_size: 1,
            },
            max_input_tokens: s.max_input_tokens,
            prompt_template: s
                .prompt_template
                .unwrap_or_else(|| DEFAULT_PROMPT_TEMPLATE.to_string()),
            decode: s.decode.unwrap_or_default(),
        });

        Ok(Self {
            run: raw.run.unwrap_or_default(),
            datasets: raw.dataset,
            embeddings,
            algorithms: raw.algorithm,
            summarise,
            source_text,
        })
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.datasets.is_empty() {
            return Err(BenchError::Config("no datasets configured".into()));
        }
        if self.embeddings.is_empty() {
            return Err(BenchError::Config("no embeddings configured".into()));
        }
        if self.algorithms.is_empty() {
            return Err(BenchError::Config("no algorithms configured".into()));
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.datasets {
            if !names.insert(format!("d:{}", d.name)) {
                return Err(BenchError::Config(format!(
                    "duplicate dataset name `{}`",
                    d.name
                )));
            }
        }
        for e in &self.embeddings {
            if !names.insert(format!("e:{}", e.name)) {
                return Err(BenchError::Config(format!(
                    "duplicate embedding name `{}`",
                    e.name
                )));
            }
            if let EmbeddingKind::Tfidf(cfg) = &e.kind {
                cfg.validate()
                    .map_err(|err| BenchError::Config(format!("embedding `{}`: {err}", e.name)))?;
            }
            if let EmbeddingKind::External(template) = &e.kind {
                if let EmbeddingSourceKind::File { path } = &template.kind {
                    let has_placeholder = path.to_string_lossy().contains("{dataset}");
                    if self.datasets.len() > 1 && !has_placeholder {
                        return Err(BenchError::Config(format!(
                            "embedding `{}`: a file source needs a {{dataset}} placeholder \
                             when more than one dataset is configured",
                            e.name
                        )));
                    }
                }
            }
        }
        let mut kinds = std::collections::HashSet::new();
        for a in &self.algorithms {
            if !kinds.insert(a.kind) {
                return Err(BenchError::Config(format!(
                    "algorithm `{}` configured twice",
                    a.kind.key()
                )));
            }
        }
        if let Some(summarise) = &self.summarise {
            summarise
                .validate()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
