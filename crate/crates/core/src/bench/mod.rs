//! Experiment grid runner and reporting.
//!
//! A run executes every (dataset x embedding x algorithm) combination —
//! twice per combination when a summariser is configured (full text vs
//! summarised text) — writes one JSON artifact per successful cell under
//! `<output_dir>/cells/`, and emits `report.csv`, `report.md` and
//! `run_report.json`. Cell artifacts are addressed by a content hash
//! covering the corpus, the embedding provenance, the algorithm
//! parameters and the engine version, so reruns skip finished cells and
//! a config edit invalidates exactly the cells it touches.

pub mod config;
pub mod report;
mod runner;

pub use config::{
    AlgorithmSpec, DatasetSpec, EmbeddingKind, EmbeddingSpec, ExperimentConfig, RunSettings,
};
pub use report::{
    compute_totals, read_run_report, select_best_rows, write_grid_csv, write_markdown,
    write_run_report, BestRow, CellRecord, CellStatus, RunReport, Version,
};
pub use runner::{families, project_cell, run_grid, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Vectorize(#[from] crate::vectorize::VectorizeError),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
    #[error(transparent)]
    Project(#[from] crate::project::ProjectError),
}
