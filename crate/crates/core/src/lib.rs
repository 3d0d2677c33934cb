//! Text clustering benchmark engine.
//!
//! The crate reproduces a text-clustering comparison pipeline end to end:
//!
//! 1. [`corpus`] loads labeled corpora from JSONL/CSV and cleans the raw
//!    text (tag stripping, e-mail removal, non-Latin filtering).
//! 2. [`vectorize`] provides the TF-IDF baseline vectorizer; [`llm`]
//!    ingests externally computed embeddings from files or an OpenAI-style
//!    HTTP endpoint, with a persistent disk cache, and can route documents
//!    through an LLM summarisation step first.
//! 3. [`cluster`] implements k-means, k-means++, Ward agglomerative
//!    clustering, fuzzy c-means and spectral clustering, all deterministic
//!    under a given seed.
//! 4. [`evaluate`] maps derived clusters to ground-truth classes by nearest
//!    centroid and scores them with weighted F1, ARI, homogeneity,
//!    silhouette and Calinski-Harabasz.
//! 5. [`project`] reduces embeddings with PCA followed by exact t-SNE for
//!    2-D scatter exports.
//! 6. [`bench`] runs the (dataset x embedding x algorithm) grid with
//!    resumable per-cell artifacts and emits CSV/Markdown comparison
//!    tables. The `bench` binary is the CLI front end.

pub mod bench;
pub mod cluster;
pub mod corpus;
pub mod evaluate;
pub mod linalg;
pub mod llm;
pub mod project;
pub mod vectorize;

pub use cluster::{Algorithm, ClusterAssignment, ClusterParams};
pub use corpus::{Corpus, Document, LabelLevel};
pub use evaluate::MetricReport;
pub use vectorize::{TfidfConfig, VectorSet, Vocabulary};
