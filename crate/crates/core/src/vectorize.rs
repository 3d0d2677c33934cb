//! TF-IDF baseline vectorizer and the `VectorSet` type shared by every
//! embedding source.
//!
//! The vocabulary is pruned by document frequency (`min_df` absolute,
//! `max_df` proportional, both exclusive), capped to the `max_features`
//! terms with the highest corpus-wide term frequency, and finally sorted
//! lexicographically so that fitting is deterministic. Weights use the
//! smoothed inverse document frequency `ln((1+N)/(1+df)) + 1` and every
//! row is L2-normalized.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

#[derive(Debug, thiserror::Error)]
pub enum VectorizeError {
    #[error("invalid tf-idf config: {0}")]
    InvalidConfig(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty vocabulary: every term was filtered out")]
    EmptyVocabulary,
    #[error("row count {rows} does not match id count {ids}")]
    RowIdMismatch { rows: usize, ids: usize },
    #[error("non-finite value in vector for document `{0}`")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// TF-IDF vocabulary pruning configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    /// Minimum absolute document frequency; terms strictly below are dropped.
    pub min_df: usize,
    /// Maximum document-frequency proportion in (0, 1]; terms strictly above are dropped.
    pub max_df: f64,
    /// Keep only this many terms, ranked by corpus-wide term frequency.
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            min_df: 5,
            max_df: 0.95,
            max_features: 8000,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<(), VectorizeError> {
        if self.min_df < 1 {
            return Err(VectorizeError::InvalidConfig("min_df must be >= 1".into()));
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(VectorizeError::InvalidConfig(
                "max_df must be in (0, 1]".into(),
            ));
        }
        if self.max_features < 1 {
            return Err(VectorizeError::InvalidConfig(
                "max_features must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted vocabulary: terms sorted lexicographically with their document
/// frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<(String, usize)>,
    index: HashMap<String, usize>,
    corpus_size: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(term, document_frequency)` pairs in lexicographic term order.
    pub fn terms(&self) -> &[(String, usize)] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Number of documents the vocabulary was fitted on.
    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    /// Writes the vocabulary as `term \t df` lines.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), VectorizeError> {
        let path = path.as_ref();
        let io = |source| VectorizeError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut writer = BufWriter::new(File::create(path).map_err(io)?);
        for (term, df) in &self.terms {
            writeln!(writer, "{term}\t{df}").map_err(io)?;
        }
        writer.flush().map_err(io)
    }
}

/// Where a vector set came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Tfidf,
    External { model: String },
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Tfidf => write!(f, "tfidf"),
            Provenance::External { model } => write!(f, "external({model})"),
        }
    }
}

/// A dense matrix of document vectors with rows aligned to document ids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    matrix: Array2<f64>,
    row_ids: Vec<String>,
    provenance: Provenance,
}

impl VectorSet {
    /// Validates alignment and finiteness.
    pub fn new(
        matrix: Array2<f64>,
        row_ids: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self, VectorizeError> {
        if matrix.nrows() != row_ids.len() {
            return Err(VectorizeError::RowIdMismatch {
                rows: matrix.nrows(),
                ids: row_ids.len(),
            });
        }
        for (row, id) in matrix.outer_iter().zip(&row_ids) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(VectorizeError::NonFinite(id.clone()));
            }
        }
        Ok(Self {
            matrix,
            row_ids,
            provenance,
        })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.matrix.ncols()
    }

    /// Indices of all-zero rows (documents with no in-vocabulary tokens).
    pub fn zero_rows(&self) -> Vec<usize> {
        self.matrix
            .outer_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().all(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Lowercased alphanumeric word tokens of length >= 2, split on
/// non-alphanumeric boundaries.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| t.chars().count() >= 2)
        .collect()
}

/// Fits the pruned vocabulary on a corpus.
pub fn fit_vocabulary(corpus: &Corpus, cfg: &TfidfConfig) -> Result<Vocabulary, VectorizeError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(VectorizeError::EmptyCorpus);
    }
    let n_docs = corpus.len();
    // term -> (document frequency, corpus-wide term frequency)
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for doc in corpus.documents() {
        let tokens = tokenize(&doc.text);
        let mut in_doc: HashMap<&str, usize> = HashMap::new();
        for token in &tokens {
            *in_doc.entry(token.as_str()).or_insert(0) += 1;
        }
        for (token, tf) in in_doc {
            let entry = counts.entry(token.to_string()).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += tf;
        }
    }

    let mut survivors: Vec<(String, usize, usize)> = counts
        .into_iter()
        .filter(|(_, (df, _))| *df >= cfg.min_df && (*df as f64 / n_docs as f64) <= cfg.max_df)
        .map(|(term, (df, tf))| (term, df, tf))
        .collect();
    if survivors.is_empty() {
        return Err(VectorizeError::EmptyVocabulary);
    }

    // Rank by term frequency, ties broken lexicographically, then keep the
    // top max_features and re-sort by term.
    survivors.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    survivors.truncate(cfg.max_features);
    survivors.sort_by(|a, b| a.0.cmp(&b.0));

    let terms: Vec<(String, usize)> = survivors
        .into_iter()
        .map(|(term, df, _)| (term, df))
        .collect();
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        index,
        corpus_size: n_docs,
    })
}

/// Smoothed inverse document frequency.
fn idf(n_docs: usize, df: usize) -> f64 {
    ((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0
}

/// Maps a corpus onto a fitted vocabulary. Out-of-vocabulary tokens are
/// ignored; documents without any in-vocabulary token become zero rows
/// (reported via [`VectorSet::zero_rows`]).
pub fn transform(corpus: &Corpus, vocab: &Vocabulary) -> Result<VectorSet, VectorizeError> {
    let n_docs = corpus.len();
    let dim = vocab.len();
    let idfs: Vec<f64> = vocab
        .terms()
        .iter()
        .map(|(_, df)| idf(vocab.corpus_size(), *df))
        .collect();

    let mut matrix = Array2::<f64>::zeros((n_docs, dim));
    for (i, doc) in corpus.documents().iter().enumerate() {
        let mut row = matrix.row_mut(i);
        for token in tokenize(&doc.text) {
            if let Some(j) = vocab.index_of(&token) {
                row[j] += idfs[j];
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    let row_ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
    VectorSet::new(matrix, row_ids, Provenance::Tfidf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn corpus_of(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                id: format!("d{i}"),
                text: (*t).to_string(),
                label: "x".to_string(),
                label2: None,
            })
            .collect();
        Corpus::new("test", docs).unwrap()
    }

    #[test]
    fn tokenize_folds_case_and_splits_punctuation() {
        assert_eq!(tokenize("Hello, hello world"), vec!["hello", "hello", "world"]);
    }

    #[test]
    fn tokenize_empty_text() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_drops_single_char_tokens() {
        assert_eq!(tokenize("a I x2 go"), vec!["x2", "go"]);
    }

    #[test]
    fn min_df_threshold_is_strict() {
        // 10 docs, "rare" appears in 4 of them: 4 < min_df=5 excludes it.
        let texts: Vec<String> = (0..10)
            .map(|i| {
                if i < 4 {
                    "common rare".to_string()
                } else {
                    "common filler".to_string()
                }
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let corpus = corpus_of(&refs);
        let cfg = TfidfConfig {
            min_df: 5,
            max_df: 1.0,
            max_features: 100,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        assert!(vocab.index_of("rare").is_none());
        assert!(vocab.index_of("common").is_some());
    }

    #[test]
    fn no_filtering_keeps_all_distinct_tokens() {
        let corpus = corpus_of(&["aa bb", "bb cc", "dd"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: usize::MAX,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        let terms: Vec<&str> = vocab.terms().iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(terms, vec!["aa", "bb", "cc", "dd"]);
    }

    #[test]
    fn max_features_ranks_by_term_frequency_with_lexicographic_ties() {
        // hand-counted: tf(aa)=3, tf(bb)=2, tf(cc)=2, tf(dd)=1;
        // the tie between bb and cc at the cutoff goes to bb.
        let corpus = corpus_of(&["aa bb aa", "bb cc aa", "cc dd"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: 2,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        let terms: Vec<&str> = vocab.terms().iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(terms, vec!["aa", "bb"]);
    }

    #[test]
    fn all_terms_filtered_is_an_error() {
        let corpus = corpus_of(&["aa", "bb"]);
        let cfg = TfidfConfig {
            min_df: 5,
            max_df: 1.0,
            max_features: 10,
        };
        assert!(matches!(
            fit_vocabulary(&corpus, &cfg),
            Err(VectorizeError::EmptyVocabulary)
        ));
    }

    #[test]
    fn single_term_document_is_one_hot() {
        let corpus = corpus_of(&["aa", "bb"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: 10,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        let vs = transform(&corpus, &vocab).unwrap();
        assert_eq!(vs.matrix()[[0, 0]], 1.0);
        assert_eq!(vs.matrix()[[0, 1]], 0.0);
    }

    #[test]
    fn tfidf_matches_hand_computed_smoothed_idf() {
        // corpus {"aa bb", "aa"}, vocab {aa, bb}:
        //   idf(aa) = ln(3/3) + 1 = 1, idf(bb) = ln(3/2) + 1
        let corpus = corpus_of(&["aa bb", "aa"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: 10,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        let vs = transform(&corpus, &vocab).unwrap();

        let idf_aa = (3.0f64 / 3.0).ln() + 1.0;
        let idf_bb = (3.0f64 / 2.0).ln() + 1.0;
        let norm = (idf_aa * idf_aa + idf_bb * idf_bb).sqrt();
        assert!((vs.matrix()[[0, 0]] - idf_aa / norm).abs() < 1e-12);
        assert!((vs.matrix()[[0, 1]] - idf_bb / norm).abs() < 1e-12);
        assert!((vs.matrix()[[1, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(vs.matrix()[[1, 1]], 0.0);
    }

    #[test]
    fn out_of_vocabulary_document_becomes_zero_row() {
        let fit_on = corpus_of(&["aa bb", "aa"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: 10,
        };
        let vocab = fit_vocabulary(&fit_on, &cfg).unwrap();
        let apply_to = corpus_of(&["zz yy", "aa"]);
        let vs = transform(&apply_to, &vocab).unwrap();
        assert_eq!(vs.zero_rows(), vec![0]);
    }

    #[test]
    fn vocabulary_exports_as_tsv() {
        let corpus = corpus_of(&["aa bb aa", "bb cc"]);
        let cfg = TfidfConfig {
            min_df: 1,
            max_df: 1.0,
            max_features: 10,
        };
        let vocab = fit_vocabulary(&corpus, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        vocab.write_tsv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "aa\t1\nbb\t2\ncc\t1\n");
    }

    #[test]
    fn vector_set_rejects_non_finite_entries() {
        let matrix = ndarray::arr2(&[[1.0, f64::NAN]]);
        let err = VectorSet::new(matrix, vec!["a".into()], Provenance::Tfidf).unwrap_err();
        assert!(matches!(err, VectorizeError::NonFinite(_)));
    }

    fn brute_force_df(corpus: &Corpus, term: &str) -> usize {
        corpus
            .documents()
            .iter()
            .filter(|d| tokenize(&d.text).iter().any(|t| t == term))
            .count()
    }

    proptest! {
        #[test]
        fn vocabulary_respects_thresholds(
            texts in proptest::collection::vec("[ab c]{0,16}", 1..12),
            min_df in 1usize..4,
            max_df in 0.3f64..1.0,
            max_features in 1usize..6,
        ) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let corpus = corpus_of(&refs);
            let cfg = TfidfConfig { min_df, max_df, max_features };
            if let Ok(vocab) = fit_vocabulary(&corpus, &cfg) {
                prop_assert!(vocab.len() <= max_features);
                let n = corpus.len() as f64;
                for (term, df) in vocab.terms() {
                    prop_assert_eq!(*df, brute_force_df(&corpus, term));
                    prop_assert!(*df >= min_df);
                    prop_assert!(*df as f64 / n <= max_df);
                }
            }
        }

        #[test]
        fn nonzero_rows_have_unit_norm(texts in proptest::collection::vec("[abcd ]{0,24}", 1..10)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let corpus = corpus_of(&refs);
            let cfg = TfidfConfig { min_df: 1, max_df: 1.0, max_features: 100 };
            if let Ok(vocab) = fit_vocabulary(&corpus, &cfg) {
                let vs = transform(&corpus, &vocab).unwrap();
                for row in vs.matrix().outer_iter() {
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        prop_assert!((norm - 1.0).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn transform_is_order_independent(texts in proptest::collection::vec("[abcd ]{1,24}", 2..8)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let corpus = corpus_of(&refs);
            let cfg = TfidfConfig { min_df: 1, max_df: 1.0, max_features: 100 };
            if let Ok(vocab) = fit_vocabulary(&corpus, &cfg) {
                let vs = transform(&corpus, &vocab).unwrap();
                // reverse document order; rows must follow their documents
                let mut docs: Vec<Document> = corpus.documents().to_vec();
                docs.reverse();
                for (i, d) in docs.iter_mut().enumerate() {
                    d.id = format!("r{i}");
                }
                let reversed = Corpus::new("rev", docs).unwrap();
                let vs_rev = transform(&reversed, &vocab).unwrap();
                let n = corpus.len();
                for i in 0..n {
                    for j in 0..vs.dimension() {
                        prop_assert_eq!(vs.matrix()[[i, j]], vs_rev.matrix()[[n - 1 - i, j]]);
                    }
                }
            }
        }
    }
}
