//! Run reports: per-cell records, best-row selection, metric dominance
//! counts and the CSV/Markdown outputs.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::Algorithm;
use crate::evaluate::MetricReport;

use super::BenchError;

/// Full/summary pipeline variant of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Full,
    Summary,
}

impl Version {
    pub fn display_name(&self) -> &'static str {
        match self {
            Version::Full => "Full",
            Version::Summary => "Summary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "failed")]
    Failed,
    #[serde(rename = "skipped-cache")]
    SkippedCache,
}

/// One executed (dataset, embedding, version, algorithm) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub dataset: String,
    pub embedding: String,
    pub version: Version,
    pub algorithm: Algorithm,
    pub k: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
    /// Hard labels; stored in per-cell artifacts, omitted from the run
    /// report to keep it small.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

/// Best algorithm for one (dataset, embedding, version), by F1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestRow {
    pub dataset: String,
    pub embedding: String,
    pub version: Version,
    pub algorithm: Algorithm,
    pub metrics: MetricReport,
    /// How many of the five metrics this row strictly wins among the
    /// dataset's full-version best rows; None when fewer than two
    /// embeddings are comparable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub engine_version: String,
    pub cells: Vec<CellRecord>,
    pub best_rows: Vec<BestRow>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Per (dataset, embedding, version), the non-failed cell with the
/// highest F1; ties fall to the earlier algorithm in declaration order.
/// Groups where every cell failed are omitted with a warning.
pub fn select_best_rows(cells: &[CellRecord]) -> Vec<BestRow> {
    let mut order: Vec<(String, String, Version)> = Vec::new();
    for cell in cells {
        let key = (cell.dataset.clone(), cell.embedding.clone(), cell.version);
        if !order.contains(&key) {
            order.push(key);
        }
    }

    let mut rows = Vec::new();
    for (dataset, embedding, version) in order {
        let mut best: Option<&CellRecord> = None;
        let mut any = false;
        for cell in cells {
            if cell.dataset != dataset || cell.embedding != embedding || cell.version != version {
                continue;
            }
            any = true;
            let Some(metrics) = &cell.metrics else {
                continue;
            };
            let better = match best.and_then(|b| b.metrics.as_ref()) {
                None => true,
                Some(current) => {
                    metrics.f1s > current.f1s
                        || (metrics.f1s == current.f1s && cell.algorithm < best.unwrap().algorithm)
                }
            };
            if better {
                best = Some(cell);
            }
        }
        match best {
            Some(cell) => rows.push(BestRow {
                dataset,
                embedding,
                version,
                algorithm: cell.algorithm,
                metrics: cell.metrics.expect("metrics present"),
                total: None,
            }),
            None if any => {
                log::warn!(
                    "all cells failed for {dataset}/{embedding}/{}; pair omitted from best rows",
                    version.display_name()
                );
            }
            None => {}
        }
    }
    rows
}

/// Fills the `total` dominance counts: for each dataset, each of the
/// five metrics awards one point to the full-version best row holding
/// its strict maximum (ties award no one). Datasets with fewer than two
/// full-version rows get `None`.
pub fn compute_totals(best_rows: &mut [BestRow]) {
    let datasets: BTreeSet<String> = best_rows.iter().map(|r| r.dataset.clone()).collect();
    for dataset in datasets {
        let indices: Vec<usize> = best_rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.dataset == dataset && r.version == Version::Full)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            for &i in &indices {
                best_rows[i].total = None;
            }
            continue;
        }
        for &i in &indices {
            best_rows[i].total = Some(0);
        }
        let metric_values: [fn(&MetricReport) -> f64; 5] = [
            |m| m.f1s,
            |m| m.ari,
            |m| m.hs,
            |m| m.ss,
            |m| m.chi,
        ];
        for extract in metric_values {
            let mut winner: Option<usize> = None;
            let mut best_value = f64::NEG_INFINITY;
            let mut tie = false;
            for &i in &indices {
                let value = extract(&best_rows[i].metrics);
                if value > best_value {
                    best_value = value;
                    winner = Some(i);
                    tie = false;
                } else if value == best_value {
                    tie = true;
                }
            }
            if let (Some(i), false) = (winner, tie) {
                *best_rows[i].total.as_mut().expect("initialized") += 1;
            }
        }
    }
}

fn fmt_f2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_f3(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_chi(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.0}")
    }
}

fn fmt_raw(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Writes the full-grid CSV (`report.csv`). Cell status deliberately
/// stays out of this file (it lives in `run_report.json`): a resumed run
/// flips statuses to `skipped-cache`, and the CSV must stay
/// byte-identical across complete runs from the same inputs.
pub fn write_grid_csv(cells: &[CellRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_path(path.as_ref())
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.as_ref().display())))?;
    writer
        .write_record([
            "dataset",
            "embedding",
            "version",
            "algorithm",
            "f1s",
            "ari",
            "hs",
            "ss",
            "chi",
        ])
        .map_err(|e| BenchError::Io(e.to_string()))?;
    for cell in cells {
        let metrics = cell.metrics.as_ref();
        let field = |f: Option<f64>| f.map(fmt_raw).unwrap_or_default();
        writer
            .write_record([
                cell.dataset.as_str(),
                cell.embedding.as_str(),
                match cell.version {
                    Version::Full => "full",
                    Version::Summary => "summary",
                },
                cell.algorithm.key(),
                &field(metrics.map(|m| m.f1s)),
                &field(metrics.map(|m| m.ari)),
                &field(metrics.map(|m| m.hs)),
                &field(metrics.map(|m| m.ss)),
                &field(metrics.map(|m| m.chi)),
            ])
            .map_err(|e| BenchError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| BenchError::Io(e.to_string()))
}

/// Writes the Markdown comparison tables (`report.md`): the best-rows
/// table with dominance totals, the full-vs-summary pairs when a
/// summariser was configured, and per-family model-size blocks when at
/// least two embeddings share a family tag.
pub fn write_markdown(
    report: &RunReport,
    families: &[(String, Vec<String>)],
    path: impl AsRef<Path>,
) -> Result<(), BenchError> {
    let mut out = String::new();
    out.push_str("# Clustering benchmark report\n");

    out.push_str("\n## Best algorithm per dataset and embedding\n\n");
    out.push_str("| Dataset | Embed. | Best Alg. | F1S | ARI | HS | SS | CHI | Total |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for row in report
        .best_rows
        .iter()
        .filter(|r| r.version == Version::Full)
    {
        let total = match row.total {
            Some(t) => format!("{t}/5"),
            None => "—".to_string(),
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            row.dataset,
            row.embedding,
            row.algorithm.display_name(),
            fmt_f2(row.metrics.f1s),
            fmt_f2(row.metrics.ari),
            fmt_f2(row.metrics.hs),
            fmt_f3(row.metrics.ss),
            fmt_chi(row.metrics.chi),
            total,
        ));
    }

    let has_summary = report
        .best_rows
        .iter()
        .any(|r| r.version == Version::Summary);
    if has_summary {
        out.push_str("\n## Summarisation effect (full vs summary inputs)\n\n");
        out.push_str("| DS | Embed. | Version | Best Alg. | F1S | ARI | HS | SS | CHI |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for row in &report.best_rows {
            let key = (row.dataset.as_str(), row.embedding.as_str());
            if !pairs.contains(&key) {
                pairs.push(key);
            }
        }
        for (dataset, embedding) in pairs {
            for version in [Version::Full, Version::Summary] {
                if let Some(row) = report.best_rows.iter().find(|r| {
                    r.dataset == dataset && r.embedding == embedding && r.version == version
                }) {
                    out.push_str(&format!(
                        "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                        dataset,
                        embedding,
                        version.display_name(),
                        row.algorithm.display_name(),
                        fmt_f2(row.metrics.f1s),
                        fmt_f2(row.metrics.ari),
                        fmt_f2(row.metrics.hs),
                        fmt_f3(row.metrics.ss),
                        fmt_chi(row.metrics.chi),
                    ));
                }
            }
        }
    }

    let multi_families: Vec<&(String, Vec<String>)> =
        families.iter().filter(|(_, members)| members.len() >= 2).collect();
    if !multi_families.is_empty() {
        out.push_str("\n## Model size comparison\n\n");
        for (family, members) in &multi_families {
            out.push_str(&format!("### Family `{family}`\n\n"));
            out.push_str("| Dataset | Embed. | Best Alg. | F1S | ARI | HS | SS | CHI |\n");
            out.push_str("|---|---|---|---|---|---|---|---|\n");
            let mut datasets: Vec<&str> = Vec::new();
            for row in &report.best_rows {
                if !datasets.contains(&row.dataset.as_str()) {
                    datasets.push(&row.dataset);
                }
            }
            for dataset in datasets {
                for member in members {
                    if let Some(row) = report.best_rows.iter().find(|r| {
                        r.dataset == dataset
                            && &r.embedding == member
                            && r.version == Version::Full
                    }) {
                        out.push_str(&format!(
                            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                            dataset,
                            member,
                            row.algorithm.display_name(),
                            fmt_f2(row.metrics.f1s),
                            fmt_f2(row.metrics.ari),
                            fmt_f2(row.metrics.hs),
                            fmt_f3(row.metrics.ss),
                            fmt_chi(row.metrics.chi),
                        ));
                    }
                }
            }
            out.push('\n');
        }
    }

    if !report.notes.is_empty() {
        out.push_str("\n## Notes\n\n");
        for note in &report.notes {
            out.push_str(&format!("- {note}\n"));
        }
    }

    let path = path.as_ref();
    let mut file = std::fs::File::create(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(out.as_bytes())
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

/// Writes the machine-readable run report (`run_report.json`).
pub fn write_run_report(report: &RunReport, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(report).expect("serializable");
    std::fs::write(path, json).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

pub fn read_run_report(path: impl AsRef<Path>) -> Result<RunReport, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}
