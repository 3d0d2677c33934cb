//! Labeled text corpora: loading, saving and text preprocessing.
//!
//! Corpora live on disk in a neutral format: JSONL (one object per line
//! with keys `id`/`text`/`label` and optional `label2`) or CSV with a
//! `id,text,label[,label2]` header. Preprocessing strips HTML/XML tags,
//! removes e-mail addresses, drops letters outside the Latin script and
//! collapses whitespace; lowercasing is deliberately left to the
//! vectorizer so that embedding inputs keep their original case.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_script::{Script, UnicodeScript};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    Empty,
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("record {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("record {line}: {message}")]
    Record { line: usize, message: String },
    #[error("document `{0}` has no level-2 label")]
    MissingLabel2(String),
    #[error("document id must not be empty (record {0})")]
    EmptyId(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labeled text document. `label` is the level-1 class; `label2` is
/// the optional second hierarchy level (only some corpora carry it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label2: Option<String>,
}

/// Which label hierarchy level to cluster against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelLevel {
    One,
    Two,
}

impl fmt::Display for LabelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelLevel::One => write!(f, "1"),
            LabelLevel::Two => write!(f, "2"),
        }
    }
}

/// An ordered collection of documents. Document order is stable and
/// drives determinism downstream (vector rows are aligned to it).
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    name: String,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, enforcing non-empty unique ids and at least one
    /// document.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId(i + 1));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            documents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Number of distinct classes actually present at the given level.
    pub fn class_count(&self, level: LabelLevel) -> Result<usize, CorpusError> {
        Ok(self.classes(level)?.len())
    }

    /// Sorted list of distinct class names at the given level.
    pub fn classes(&self, level: LabelLevel) -> Result<Vec<String>, CorpusError> {
        let mut set = std::collections::BTreeSet::new();
        for doc in &self.documents {
            match level {
                LabelLevel::One => {
                    set.insert(doc.label.clone());
                }
                LabelLevel::Two => {
                    let l2 = doc
                        .label2
                        .as_ref()
                        .ok_or_else(|| CorpusError::MissingLabel2(doc.id.clone()))?;
                    set.insert(l2.clone());
                }
            }
        }
        Ok(set.into_iter().collect())
    }

    /// Integer class ids per document (classes numbered by sorted name)
    /// together with the class names.
    pub fn class_ids(&self, level: LabelLevel) -> Result<(Vec<usize>, Vec<String>), CorpusError> {
        let classes = self.classes(level)?;
        let index: BTreeMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let ids = self
            .documents
            .iter()
            .map(|doc| {
                let name = match level {
                    LabelLevel::One => doc.label.as_str(),
                    LabelLevel::Two => doc.label2.as_deref().unwrap_or_default(),
                };
                index[name]
            })
            .collect();
        Ok((ids, classes))
    }

    /// Content hash over ids, texts and labels; used for cache identity.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        for doc in &self.documents {
            for part in [
                doc.id.as_str(),
                doc.text.as_str(),
                doc.label.as_str(),
                doc.label2.as_deref().unwrap_or(""),
            ] {
                hasher.update([0u8]);
                hasher.update(part.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// On-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
    label2: Option<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a corpus from `path`. The corpus name is the file stem.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let documents = match format {
        CorpusFormat::Jsonl => read_jsonl(reader)?,
        CorpusFormat::Csv => read_csv(reader)?,
    };
    Corpus::new(name, documents)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<Document>, CorpusError> {
    let mut documents = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        documents.push(record_to_document(raw, line_no)?);
    }
    Ok(documents)
}

fn record_to_document(raw: RawRecord, line: usize) -> Result<Document, CorpusError> {
    let missing = |field: &str| CorpusError::MissingField {
        line,
        field: field.to_string(),
    };
    let id = raw.id.ok_or_else(|| missing("id"))?;
    if id.is_empty() {
        return Err(CorpusError::EmptyId(line));
    }
    Ok(Document {
        id,
        text: raw.text.ok_or_else(|| missing("text"))?,
        label: raw.label.ok_or_else(|| missing("label"))?,
        label2: raw.label2,
    })
}

fn read_csv(reader: impl BufRead) -> Result<Vec<Document>, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new().from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| CorpusError::Record {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_col = column("id").ok_or_else(|| CorpusError::MissingField {
        line: 1,
        field: "id".to_string(),
    })?;
    let text_col = column("text").ok_or_else(|| CorpusError::MissingField {
        line: 1,
        field: "text".to_string(),
    })?;
    let label_col = column("label").ok_or_else(|| CorpusError::MissingField {
        line: 1,
        field: "label".to_string(),
    })?;
    let label2_col = column("label2");

    let mut documents = Vec::new();
    for (idx, record) in csv_reader.records().enumerate() {
        let line = idx + 2; // header occupies line 1
        let record = record.map_err(|e| CorpusError::Record {
            line,
            message: e.to_string(),
        })?;
        let field = |col: usize, name: &str| {
            record
                .get(col)
                .map(str::to_string)
                .ok_or_else(|| CorpusError::MissingField {
                    line,
                    field: name.to_string(),
                })
        };
        let id = field(id_col, "id")?;
        if id.is_empty() {
            return Err(CorpusError::EmptyId(line));
        }
        let label2 = match label2_col {
            Some(col) => record
                .get(col)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            None => None,
        };
        documents.push(Document {
            id,
            text: field(text_col, "text")?,
            label: field(label_col, "label")?,
            label2,
        });
    }
    Ok(documents)
}

/// Writes a corpus back to disk in the given format. `load_corpus` on the
/// result reproduces the documents byte for byte.
pub fn save_corpus(
    corpus: &Corpus,
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        CorpusFormat::Jsonl => {
            for doc in corpus.documents() {
                let line = serde_json::to_string(doc).expect("document serializes");
                writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
            }
        }
        CorpusFormat::Csv => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            let has_label2 = corpus.documents().iter().any(|d| d.label2.is_some());
            let mut header = vec!["id", "text", "label"];
            if has_label2 {
                header.push("label2");
            }
            csv_writer.write_record(&header).map_err(csv_io(path))?;
            for doc in corpus.documents() {
                let mut row = vec![doc.id.clone(), doc.text.clone(), doc.label.clone()];
                if has_label2 {
                    row.push(doc.label2.clone().unwrap_or_default());
                }
                csv_writer.write_record(&row).map_err(csv_io(path))?;
            }
            csv_writer.flush().map_err(|e| io_err(path, e))?;
            return Ok(());
        }
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> CorpusError + '_ {
    move |e| CorpusError::Record {
        line: 0,
        message: format!("{}: {e}", path.display()),
    }
}

// Tag pattern: comments, then <tag>, </tag>, <!doctype>, <?pi?>. A '<'
// not followed by one of these starters is treated as literal text, so
// inequalities in prose survive.
static TAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->|<[!/?]?[A-Za-z][^>]*>").unwrap());

static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}").unwrap());

/// True for characters retained by preprocessing: Latin-script letters
/// (incl. precomposed diacritics), ASCII digits, whitespace and ASCII
/// punctuation.
pub fn is_allowed_char(c: char) -> bool {
    if c.is_ascii_digit() || c.is_whitespace() || c.is_ascii_punctuation() {
        return true;
    }
    c.is_alphabetic() && c.script() == Script::Latin
}

/// Cleans a document's text: drops non-Latin letters and other
/// out-of-class characters, strips markup tags, removes e-mail
/// addresses and collapses whitespace runs to single spaces.
///
/// The operation is idempotent and never introduces characters outside
/// the allowed class. Character filtering runs first so that removed
/// characters cannot split a tag or an address and hide it from the
/// later passes; tags and addresses are replaced by a space so their
/// removal cannot splice surrounding text into new matches.
pub fn preprocess(doc: &Document) -> Document {
    let filtered: String = doc.text.chars().filter(|&c| is_allowed_char(c)).collect();
    let without_tags = TAG_RE.replace_all(&filtered, " ");
    let without_emails = EMAIL_RE.replace_all(&without_tags, " ");
    let collapsed = collapse_whitespace(&without_emails);
    Document {
        id: doc.id.clone(),
        text: collapsed,
        label: doc.label.clone(),
        label2: doc.label2.clone(),
    }
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// Preprocesses every document, keeping corpus order. Documents whose
/// text ends up empty are retained; their ids are returned so the run
/// report can count them.
pub fn preprocess_corpus(corpus: &Corpus) -> (Corpus, Vec<String>) {
    let documents: Vec<Document> = corpus.documents().iter().map(preprocess).collect();
    let empty_ids = documents
        .iter()
        .filter(|d| d.text.is_empty())
        .map(|d| d.id.clone())
        .collect();
    let processed = Corpus {
        name: corpus.name.clone(),
        documents,
    };
    (processed, empty_ids)
}
