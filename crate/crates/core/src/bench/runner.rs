//! Grid execution: cell identity hashing, resume, bounded-parallel
//! clustering and report assembly.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cluster::{self, ClusterParams};
use crate::corpus::{load_corpus, preprocess_corpus, Corpus};
use crate::evaluate::score_cell;
use crate::llm::LlmClient;
use crate::project::{
    export_projection, project, subsample_per_class, Projection2D, ProjectionConfig,
    TSNE_MAX_POINTS,
};
use crate::vectorize::{fit_vocabulary, transform, VectorSet};

use super::config::{EmbeddingKind, ExperimentConfig};
use super::report::{
    compute_totals, read_run_report, select_best_rows, write_grid_csv, write_markdown,
    write_run_report, CellRecord, CellStatus, RunReport, Version,
};
use super::BenchError;

/// Outcome of a grid run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub run_dir: PathBuf,
    pub computed: usize,
    pub from_cache: usize,
    pub failed: usize,
}

impl RunOutcome {
    pub fn all_ok(&self) -> bool {
        self.failed == 0
    }
}

/// Embedding families declared in the config, in config order.
pub fn families(cfg: &ExperimentConfig) -> Vec<(String, Vec<String>)> {
    let mut ordered: Vec<(String, Vec<String>)> = Vec::new();
    for e in &cfg.embeddings {
        let Some(family) = &e.family else { continue };
        match ordered.iter_mut().find(|(f, _)| f == family) {
            Some((_, members)) => members.push(e.name.clone()),
            None => ordered.push((family.clone(), vec![e.name.clone()])),
        }
    }
    ordered
}

struct DatasetContext {
    name: String,
    raw_hash: String,
    truth: Vec<usize>,
    k: usize,
    /// Preprocessed corpus per pipeline version.
    corpora: HashMap<Version, Corpus>,
    class_names: Vec<String>,
}

struct CellDesc {
    cell_id: String,
    dataset_idx: usize,
    embedding_idx: usize,
    version: Version,
    params: ClusterParams,
}

fn sha_parts(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

fn embedding_identity(cfg: &ExperimentConfig, embedding_idx: usize, dataset: &str) -> String {
    match &cfg.embeddings[embedding_idx].kind {
        EmbeddingKind::Tfidf(tfidf) => format!(
            "tfidf:{}",
            serde_json::to_string(tfidf).expect("serializable")
        ),
        EmbeddingKind::External(template) => {
            let source = template.resolve(dataset);
            match &source.kind {
                crate::llm::EmbeddingSourceKind::File { path } => {
                    let content = std::fs::read(path)
                        .map(|bytes| sha_parts(&[&String::from_utf8_lossy(&bytes)]))
                        .unwrap_or_else(|_| "absent".to_string());
                    format!("file:{}:{}:{}", source.model_name, path.display(), content)
                }
                crate::llm::EmbeddingSourceKind::Http(endpoint) => format!(
                    "http:{}:{}:{}",
                    source.model_name, endpoint.url, endpoint.model_id
                ),
            }
        }
    }
}

fn cell_hash(
    cfg: &ExperimentConfig,
    dataset: &DatasetContext,
    embedding_idx: usize,
    version: Version,
    params: &ClusterParams,
    summariser_tag: &str,
) -> String {
    let params_json = serde_json::to_string(params).expect("serializable");
    let mapping = format!("{:?}", cfg.run.mapping);
    let version_tag = match version {
        Version::Full => "full".to_string(),
        Version::Summary => format!("summary:{summariser_tag}"),
    };
    sha_parts(&[
        "cell-v1",
        env!("CARGO_PKG_VERSION"),
        &dataset.name,
        &dataset.raw_hash,
        &version_tag,
        &embedding_identity(cfg, embedding_idx, &dataset.name),
        &params_json,
        &mapping,
    ])
}

fn artifact_path(run_dir: &Path, cell_id: &str) -> PathBuf {
    run_dir.join("cells").join(format!("{cell_id}.json"))
}

fn write_artifact(run_dir: &Path, record: &CellRecord) -> Result<(), BenchError> {
    let path = artifact_path(run_dir, &record.cell_id);
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let json = serde_json::to_vec_pretty(record).expect("serializable");
    std::fs::write(&tmp, json).map_err(|e| BenchError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, &path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

fn load_artifact(run_dir: &Path, cell_id: &str) -> Option<CellRecord> {
    let path = artifact_path(run_dir, cell_id);
    let text = std::fs::read_to_string(path).ok()?;
    let record: CellRecord = serde_json::from_str(&text).ok()?;
    (record.cell_id == cell_id).then_some(record)
}

/// Obtains the vector set for one (dataset, embedding, version) group.
/// Misconfiguration (bad endpoint setup, 4xx, missing API key) is fatal
/// and aborts the run; anything tied to that group's inputs or endpoint
/// health (missing or malformed file, exhausted retries) only fails the
/// group's cells.
fn build_vectors(
    cfg: &ExperimentConfig,
    client: &LlmClient,
    dataset: &DatasetContext,
    embedding_idx: usize,
    version: Version,
    notes: &mut Vec<String>,
) -> Result<Result<VectorSet, String>, BenchError> {
    let corpus = &dataset.corpora[&version];
    let spec = &cfg.embeddings[embedding_idx];
    match &spec.kind {
        EmbeddingKind::Tfidf(tfidf_cfg) => {
            let vocab = match fit_vocabulary(corpus, tfidf_cfg) {
                Ok(v) => v,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let vectors = match transform(corpus, &vocab) {
                Ok(v) => v,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let zero_rows = vectors.zero_rows();
            if !zero_rows.is_empty() {
                notes.push(format!(
                    "{}/{}/{}: {} document(s) with no in-vocabulary tokens (zero rows)",
                    dataset.name,
                    spec.name,
                    version.display_name(),
                    zero_rows.len()
                ));
            }
            Ok(Ok(vectors))
        }
        EmbeddingKind::External(template) => {
            let source = template.resolve(&dataset.name);
            match client.embed_corpus(corpus, &source) {
                Ok(vectors) => Ok(Ok(vectors)),
                Err(e @ crate::llm::LlmError::Config(_)) => Err(BenchError::Llm(e)),
                Err(e) => Ok(Err(e.to_string())),
            }
        }
    }
}

/// Executes the whole grid. Per-cell failures are recorded and do not
/// abort the run; configuration and dataset errors do.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<RunOutcome, BenchError> {
    let run_dir = cfg.run.output_dir.clone();
    std::fs::create_dir_all(run_dir.join("cells"))
        .map_err(|e| BenchError::Io(format!("{}: {e}", run_dir.display())))?;
    std::fs::write(run_dir.join("config.toml"), &cfg.source_text)
        .map_err(|e| BenchError::Io(e.to_string()))?;

    let client = LlmClient::new(&cfg.run.cache_dir)?;
    let mut notes: Vec<String> = Vec::new();

    let mut versions = vec![Version::Full];
    let summariser_tag = match &cfg.summarise {
        Some(summarise) => {
            versions.push(Version::Summary);
            notes.extend(summarise.conflict_notes());
            sha_parts(&[&serde_json::to_string(summarise).expect("serializable")])
        }
        None => String::new(),
    };

    // dataset contexts: load, preprocess, optionally summarise
    let mut datasets = Vec::with_capacity(cfg.datasets.len());
    for spec in &cfg.datasets {
        let raw = load_corpus(&spec.path, spec.format)?;
        let raw_hash = raw.content_hash();
        let (preprocessed, empty_ids) = preprocess_corpus(&raw);
        if !empty_ids.is_empty() {
            notes.push(format!(
                "{}: {} document(s) empty after preprocessing",
                spec.name,
                empty_ids.len()
            ));
        }
        let k = preprocessed.class_count(spec.label_level)?;
        if k < 2 {
            return Err(BenchError::Config(format!(
                "dataset `{}` has {k} class(es) at label level {}; need at least 2",
                spec.name, spec.label_level
            )));
        }
        let (truth, class_names) = preprocessed.class_ids(spec.label_level)?;

        let mut corpora = HashMap::new();
        if versions.contains(&Version::Summary) {
            let summarise = cfg.summarise.as_ref().expect("summary version configured");
            let (summarised, unsummarised) = client.summarise_corpus(&preprocessed, summarise)?;
            if !unsummarised.is_empty() {
                notes.push(format!(
                    "{}: {} document(s) left unsummarised after retries",
                    spec.name,
                    unsummarised.len()
                ));
            }
            corpora.insert(Version::Summary, summarised);
        }
        corpora.insert(Version::Full, preprocessed);

        datasets.push(DatasetContext {
            name: spec.name.clone(),
            raw_hash,
            truth,
            k,
            corpora,
            class_names,
        });
    }

    // cell descriptors in config order
    let mut descs: Vec<CellDesc> = Vec::new();
    for (dataset_idx, dataset) in datasets.iter().enumerate() {
        for embedding_idx in 0..cfg.embeddings.len() {
            for &version in &versions {
                for algorithm in &cfg.algorithms {
                    let params = algorithm.params_for(dataset.k, cfg.run.seed_override);
                    let cell_id = cell_hash(
                        cfg,
                        dataset,
                        embedding_idx,
                        version,
                        &params,
                        &summariser_tag,
                    );
                    descs.push(CellDesc {
                        cell_id,
                        dataset_idx,
                        embedding_idx,
                        version,
                        params,
                    });
                }
            }
        }
    }

    // resume: split cached cells from pending work
    let mut slots: Vec<Option<CellRecord>> = Vec::with_capacity(descs.len());
    let mut pending: Vec<usize> = Vec::new();
    for (i, desc) in descs.iter().enumerate() {
        match load_artifact(&run_dir, &desc.cell_id) {
            Some(mut record) => {
                record.status = CellStatus::SkippedCache;
                record.labels = None;
                slots.push(Some(record));
            }
            None => {
                slots.push(None);
                pending.push(i);
            }
        }
    }
    let from_cache = descs.len() - pending.len();

    // vector sets for the groups that still have work
    let mut groups: HashMap<(usize, usize, Version), Arc<Result<VectorSet, String>>> =
        HashMap::new();
    for &i in &pending {
        let desc = &descs[i];
        let key = (desc.dataset_idx, desc.embedding_idx, desc.version);
        if let std::collections::hash_map::Entry::Vacant(entry) = groups.entry(key) {
            let vectors = build_vectors(
                cfg,
                &client,
                &datasets[desc.dataset_idx],
                desc.embedding_idx,
                desc.version,
                &mut notes,
            )?;
            entry.insert(Arc::new(vectors));
        }
    }

    // bounded worker pool over the remaining cells
    let threads = if cfg.run.parallelism == 0 {
        num_cpus::get_physical()
    } else {
        cfg.run.parallelism
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;

    let computed_records: Vec<CellRecord> = pool.install(|| {
        pending
            .par_iter()
            .map(|&i| {
                let desc = &descs[i];
                let dataset = &datasets[desc.dataset_idx];
                let vectors = &groups[&(desc.dataset_idx, desc.embedding_idx, desc.version)];
                run_cell(cfg, desc, dataset, vectors)
            })
            .collect()
    });
    let mut computed = 0;
    for (slot, record) in pending.iter().zip(computed_records) {
        if record.status == CellStatus::Ok {
            computed += 1;
            write_artifact(&run_dir, &record)?;
        }
        let mut stored = record;
        stored.labels = None;
        slots[*slot] = Some(stored);
    }

    let cells: Vec<CellRecord> = slots.into_iter().map(|s| s.expect("slot filled")).collect();
    let failed = cells
        .iter()
        .filter(|c| c.status == CellStatus::Failed)
        .count();

    let mut best_rows = select_best_rows(&cells);
    compute_totals(&mut best_rows);
    let report = RunReport {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        cells,
        best_rows,
        notes,
    };

    write_grid_csv(&report.cells, run_dir.join("report.csv"))?;
    write_markdown(&report, &families(cfg), run_dir.join("report.md"))?;
    write_run_report(&report, run_dir.join("run_report.json"))?;

    Ok(RunOutcome {
        report,
        run_dir,
        computed,
        from_cache,
        failed,
    })
}

fn run_cell(
    cfg: &ExperimentConfig,
    desc: &CellDesc,
    dataset: &DatasetContext,
    vectors: &Result<VectorSet, String>,
) -> CellRecord {
    let base = CellRecord {
        cell_id: desc.cell_id.clone(),
        dataset: dataset.name.clone(),
        embedding: cfg.embeddings[desc.embedding_idx].name.clone(),
        version: desc.version,
        algorithm: desc.params.algorithm,
        k: desc.params.k,
        seed: desc.params.seed,
        status: CellStatus::Failed,
        metrics: None,
        error: None,
        wall_time_s: 0.0,
        labels: None,
    };
    let vectors = match vectors {
        Ok(v) => v,
        Err(cause) => {
            return CellRecord {
                error: Some(cause.clone()),
                ..base
            }
        }
    };

    let start = Instant::now();
    let assignment = match cluster::run(vectors.matrix(), &desc.params) {
        Ok(a) => a,
        Err(e) => {
            return CellRecord {
                error: Some(e.to_string()),
                wall_time_s: start.elapsed().as_secs_f64(),
                ..base
            }
        }
    };
    let metrics = match score_cell(
        vectors.matrix(),
        &assignment,
        &dataset.truth,
        dataset.class_names.len(),
        cfg.run.mapping,
    ) {
        Ok(m) => m,
        Err(e) => {
            return CellRecord {
                error: Some(e.to_string()),
                wall_time_s: start.elapsed().as_secs_f64(),
                ..base
            }
        }
    };
    CellRecord {
        status: CellStatus::Ok,
        metrics: Some(metrics),
        wall_time_s: start.elapsed().as_secs_f64(),
        labels: Some(assignment.hard_labels),
        ..base
    }
}

/// Rebuilds a cell's vectors and writes its PCA + t-SNE projection,
/// coloured by ground-truth class, as CSV and SVG next to the other run
/// outputs. The cell is addressed by a unique `cell_id` prefix.
pub fn project_cell(
    run_dir: &Path,
    cell_prefix: &str,
    projection_cfg: &ProjectionConfig,
) -> Result<(PathBuf, PathBuf), BenchError> {
    let report = read_run_report(run_dir.join("run_report.json"))?;
    let matches: Vec<&CellRecord> = report
        .cells
        .iter()
        .filter(|c| c.cell_id.starts_with(cell_prefix))
        .collect();
    let cell = match matches.as_slice() {
        [] => {
            return Err(BenchError::Config(format!(
                "no cell with id prefix `{cell_prefix}`"
            )))
        }
        [cell] => *cell,
        _ => {
            return Err(BenchError::Config(format!(
                "cell id prefix `{cell_prefix}` is ambiguous ({} matches)",
                matches.len()
            )))
        }
    };

    let cfg = ExperimentConfig::load(run_dir.join("config.toml"))?;
    let dataset_spec = cfg
        .datasets
        .iter()
        .find(|d| d.name == cell.dataset)
        .ok_or_else(|| {
            BenchError::Config(format!("dataset `{}` not in run config", cell.dataset))
        })?;
    let embedding_idx = cfg
        .embeddings
        .iter()
        .position(|e| e.name == cell.embedding)
        .ok_or_else(|| {
            BenchError::Config(format!("embedding `{}` not in run config", cell.embedding))
        })?;

    let raw = load_corpus(&dataset_spec.path, dataset_spec.format)?;
    let (preprocessed, _) = preprocess_corpus(&raw);
    let corpus = match cell.version {
        Version::Full => preprocessed,
        Version::Summary => {
            let summarise = cfg.summarise.as_ref().ok_or_else(|| {
                BenchError::Config("run config has no summariser for a summary cell".into())
            })?;
            let client = LlmClient::new(&cfg.run.cache_dir)?;
            client.summarise_corpus(&preprocessed, summarise)?.0
        }
    };
    let (truth, class_names) = corpus.class_ids(dataset_spec.label_level)?;

    let client = LlmClient::new(&cfg.run.cache_dir)?;
    let mut notes = Vec::new();
    let context = DatasetContext {
        name: cell.dataset.clone(),
        raw_hash: String::new(),
        truth: truth.clone(),
        k: class_names.len(),
        corpora: HashMap::from([(cell.version, corpus)]),
        class_names: class_names.clone(),
    };
    let vectors = build_vectors(&cfg, &client, &context, embedding_idx, cell.version, &mut notes)?
        .map_err(BenchError::Config)?;

    // subsample per class when the corpus exceeds the exact t-SNE cap
    let (vectors, truth) = if vectors.len() > TSNE_MAX_POINTS {
        let keep = subsample_per_class(&truth, TSNE_MAX_POINTS, projection_cfg.tsne.seed);
        let mut matrix = ndarray::Array2::<f64>::zeros((keep.len(), vectors.dimension()));
        let mut ids = Vec::with_capacity(keep.len());
        let mut sub_truth = Vec::with_capacity(keep.len());
        for (row, &src) in keep.iter().enumerate() {
            matrix.row_mut(row).assign(&vectors.matrix().row(src));
            ids.push(vectors.row_ids()[src].clone());
            sub_truth.push(truth[src]);
        }
        let vs = VectorSet::new(matrix, ids, vectors.provenance().clone())
            .map_err(BenchError::Vectorize)?;
        (vs, sub_truth)
    } else {
        (vectors, truth)
    };

    let projection: Projection2D = project(&vectors, projection_cfg)?;
    let labels: Vec<String> = truth.iter().map(|&t| class_names[t].clone()).collect();

    let out_dir = run_dir.join("projections");
    std::fs::create_dir_all(&out_dir).map_err(|e| BenchError::Io(e.to_string()))?;
    let short = &cell.cell_id[..cell.cell_id.len().min(12)];
    let csv_path = out_dir.join(format!("{short}.csv"));
    let svg_path = out_dir.join(format!("{short}.svg"));
    export_projection(&projection, &labels, &csv_path, &svg_path)?;
    Ok((csv_path, svg_path))
}
