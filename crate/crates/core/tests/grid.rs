//! End-to-end grid runner tests on synthetic corpora: cardinality,
//! resume-from-cache, report shapes and the CLI surface.

mod common;

use std::path::Path;
use std::process::Command;

use common::{synthetic_corpus_jsonl, StubServer};
use textclust::bench::{run_grid, CellStatus, ExperimentConfig, Version};

fn write_dataset(dir: &Path, name: &str, docs_per_class: usize, classes: usize) {
    let jsonl = synthetic_corpus_jsonl(name, docs_per_class, classes, 7);
    std::fs::write(dir.join(format!("{name}.jsonl")), jsonl).unwrap();
}

fn base_config(dir: &Path, run_name: &str) -> String {
    format!(
        r#"
[run]
output_dir = "{out}"
cache_dir = "{cache}"
parallelism = 2

[[dataset]]
name = "alpha"
path = "{data}/alpha.jsonl"

[[embedding]]
name = "tfidf"
kind = "tfidf"
min_df = 2
max_df = 1.0
max_features = 200

[[algorithm]]
kind = "kmeans"

[[algorithm]]
kind = "kmeans_pp"

[[algorithm]]
kind = "ahc_ward"

[[algorithm]]
kind = "fuzzy_cm"

[[algorithm]]
kind = "spectral"
"#,
        out = dir.join(run_name).display(),
        cache = dir.join("cache").display(),
        data = dir.display(),
    )
}

#[test]
fn grid_writes_one_artifact_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 12, 3);
    // two embeddings x five algorithms = 10 cells
    let config_text = base_config(dir.path(), "run1").replace(
        "[[algorithm]]\nkind = \"kmeans\"",
        "[[embedding]]\nname = \"tfidf-small\"\nkind = \"tfidf\"\nmin_df = 2\nmax_df = 1.0\nmax_features = 50\n\n[[algorithm]]\nkind = \"kmeans\"",
    );
    let cfg = ExperimentConfig::from_toml(&config_text).unwrap();
    let outcome = run_grid(&cfg).unwrap();

    assert_eq!(outcome.report.cells.len(), 10);
    assert_eq!(outcome.failed, 0, "{:#?}", outcome.report.cells);
    assert!(outcome.report.cells.iter().all(|c| c.status == CellStatus::Ok));
    let artifacts = std::fs::read_dir(outcome.run_dir.join("cells")).unwrap().count();
    assert_eq!(artifacts, 10);
    assert!(outcome.run_dir.join("report.csv").exists());
    assert!(outcome.run_dir.join("run_report.json").exists());
    assert!(outcome.run_dir.join("config.toml").exists());
    let markdown = std::fs::read_to_string(outcome.run_dir.join("report.md")).unwrap();
    assert!(markdown.contains("| Dataset | Embed. | Best Alg. | F1S | ARI | HS | SS | CHI | Total |"));

    // every cell id is unique
    let mut ids: Vec<&str> = outcome.report.cells.iter().map(|c| c.cell_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 10);
}

#[test]
fn rerun_skips_cached_cells_and_recomputes_deleted_ones() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 10, 2);
    let cfg = ExperimentConfig::from_toml(&base_config(dir.path(), "run1")).unwrap();

    let first = run_grid(&cfg).unwrap();
    assert_eq!(first.computed, 5);
    assert_eq!(first.from_cache, 0);

    let second = run_grid(&cfg).unwrap();
    assert_eq!(second.computed, 0);
    assert_eq!(second.from_cache, 5);
    assert!(second
        .report
        .cells
        .iter()
        .all(|c| c.status == CellStatus::SkippedCache));

    // deleting one artifact recomputes exactly that cell
    let victim = &second.report.cells[2].cell_id;
    std::fs::remove_file(second.run_dir.join("cells").join(format!("{victim}.json"))).unwrap();
    let third = run_grid(&cfg).unwrap();
    assert_eq!(third.computed, 1);
    assert_eq!(third.from_cache, 4);
    let recomputed: Vec<&str> = third
        .report
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok)
        .map(|c| c.cell_id.as_str())
        .collect();
    assert_eq!(recomputed, vec![victim.as_str()]);
}

#[test]
fn file_embeddings_feed_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);

    // build an embedding file aligned to the dataset ids, shuffled order
    let corpus = textclust::corpus::load_corpus(
        dir.path().join("alpha.jsonl"),
        textclust::corpus::CorpusFormat::Jsonl,
    )
    .unwrap();
    let mut lines = vec![serde_json::json!({"model": "toy-model", "dim": 3}).to_string()];
    for (i, doc) in corpus.documents().iter().enumerate().rev() {
        let class = if doc.label == "class0" { 0.0 } else { 10.0 };
        lines.push(
            serde_json::json!({"id": doc.id, "vector": [class, i as f64 * 0.01, 1.0]}).to_string(),
        );
    }
    std::fs::write(dir.path().join("alpha-emb.jsonl"), lines.join("\n")).unwrap();

    let config_text = format!(
        r#"
[run]
output_dir = "{out}"
cache_dir = "{cache}"

[[dataset]]
name = "alpha"
path = "{data}/alpha.jsonl"

[[embedding]]
name = "toy"
kind = "file"
path = "{data}/{{dataset}}-emb.jsonl"

[[algorithm]]
kind = "kmeans"
"#,
        out = dir.path().join("run-file").display(),
        cache = dir.path().join("cache").display(),
        data = dir.path().display(),
    );
    let cfg = ExperimentConfig::from_toml(&config_text).unwrap();
    let outcome = run_grid(&cfg).unwrap();
    assert_eq!(outcome.failed, 0, "{:#?}", outcome.report.cells);
    let metrics = outcome.report.cells[0].metrics.unwrap();
    // the file vectors separate the classes perfectly
    assert!(metrics.ari > 0.99, "ari {}", metrics.ari);
}

#[test]
fn summarised_version_doubles_the_grid_and_reports_pairs() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);
    let server = StubServer::start(|_, body| {
        // echo a class-dependent summary so the two versions differ
        let prompt = body["messages"][0]["content"].as_str().unwrap_or("");
        let word = prompt.split_whitespace().find(|w| w.contains("w0x")).unwrap_or("generic");
        (
            200,
            serde_json::json!({"choices": [{"message": {"content": format!("summary about {word} topic")}}]}),
        )
    });

    let config_text = format!(
        r#"
[run]
output_dir = "{out}"
cache_dir = "{cache}"

[[dataset]]
name = "alpha"
path = "{data}/alpha.jsonl"

[[embedding]]
name = "tfidf"
kind = "tfidf"
min_df = 1
max_df = 1.0
max_features = 500

[[algorithm]]
kind = "kmeans"

[[algorithm]]
kind = "ahc_ward"

[summarise]
url = "{summarise_url}"
model_id = "stub-chat"
max_input_tokens = 64
"#,
        out = dir.path().join("run-sum").display(),
        cache = dir.path().join("cache").display(),
        data = dir.path().display(),
        summarise_url = server.url("/v1/chat/completions"),
    );
    let cfg = ExperimentConfig::from_toml(&config_text).unwrap();
    let outcome = run_grid(&cfg).unwrap();

    // 1 dataset x 1 embedding x 2 versions x 2 algorithms
    assert_eq!(outcome.report.cells.len(), 4);
    let summary_cells = outcome
        .report
        .cells
        .iter()
        .filter(|c| c.version == Version::Summary)
        .count();
    assert_eq!(summary_cells, 2);

    let markdown = std::fs::read_to_string(outcome.run_dir.join("report.md")).unwrap();
    assert!(markdown.contains("Summarisation effect"));
    assert!(markdown.contains("| Full |") || markdown.contains("| Full "));
    assert!(markdown.contains("Summary"));
    // the decode-parameter conflict is surfaced in the notes
    assert!(outcome
        .report
        .notes
        .iter()
        .any(|n| n.contains("do_sample=true with temperature=0")));
}

#[test]
fn model_size_families_get_their_own_table() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);
    let corpus = textclust::corpus::load_corpus(
        dir.path().join("alpha.jsonl"),
        textclust::corpus::CorpusFormat::Jsonl,
    )
    .unwrap();
    for (suffix, offset) in [("7b", 0.0), ("40b", 0.5)] {
        let mut lines = Vec::new();
        for doc in corpus.documents() {
            let class = if doc.label == "class0" { 0.0 } else { 8.0 };
            lines.push(
                serde_json::json!({"id": doc.id, "vector": [class + offset, 1.0]}).to_string(),
            );
        }
        std::fs::write(
            dir.path().join(format!("alpha-fal{suffix}.jsonl")),
            lines.join("\n"),
        )
        .unwrap();
    }

    let config_text = format!(
        r#"
[run]
output_dir = "{out}"
cache_dir = "{cache}"

[[dataset]]
name = "alpha"
path = "{data}/alpha.jsonl"

[[embedding]]
name = "falcon-7b"
kind = "file"
path = "{data}/{{dataset}}-fal7b.jsonl"
family = "falcon"

[[embedding]]
name = "falcon-40b"
kind = "file"
path = "{data}/{{dataset}}-fal40b.jsonl"
family = "falcon"

[[algorithm]]
kind = "kmeans"
"#,
        out = dir.path().join("run-family").display(),
        cache = dir.path().join("cache").display(),
        data = dir.path().display(),
    );
    let cfg = ExperimentConfig::from_toml(&config_text).unwrap();
    let outcome = run_grid(&cfg).unwrap();
    assert_eq!(outcome.failed, 0);
    let markdown = std::fs::read_to_string(outcome.run_dir.join("report.md")).unwrap();
    assert!(markdown.contains("Model size comparison"));
    assert!(markdown.contains("Family `falcon`"));
    assert!(markdown.contains("falcon-7b"));
    assert!(markdown.contains("falcon-40b"));
}

#[test]
fn failed_cells_do_not_abort_but_fail_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, base_config(dir.path(), "fail-run")).unwrap();

    // point all cells at a missing embedding file
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--embeddings=file:/nonexistent/vectors.jsonl")
        .status()
        .unwrap();
    assert!(!status.success());

    // the grid still completed: every cell is present and marked failed
    let report =
        textclust::bench::read_run_report(dir.path().join("fail-run/run_report.json")).unwrap();
    assert_eq!(report.cells.len(), 5);
    assert!(report
        .cells
        .iter()
        .all(|c| c.status == CellStatus::Failed && c.error.is_some()));
    // the CSV keeps one row per cell with empty metric fields
    let csv = std::fs::read_to_string(dir.path().join("fail-run/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn endpoint_misconfiguration_aborts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);
    // a 4xx from the endpoint is a configuration problem, not flakiness
    let server = StubServer::start(|_, _| (400, serde_json::json!({"error": "unknown model"})));
    let config_text = format!(
        r#"
[run]
output_dir = "{out}"
cache_dir = "{cache}"

[[dataset]]
name = "alpha"
path = "{data}/alpha.jsonl"

[[embedding]]
name = "remote"
kind = "http"
url = "{url}"
model_id = "nope"
batch_size = 8

[[algorithm]]
kind = "kmeans"
"#,
        out = dir.path().join("run-4xx").display(),
        cache = dir.path().join("cache").display(),
        data = dir.path().display(),
        url = server.url("/v1/embeddings"),
    );
    let cfg = ExperimentConfig::from_toml(&config_text).unwrap();
    let err = run_grid(&cfg).unwrap_err();
    assert!(err.to_string().contains("400"), "{err}");
}

#[test]
fn cli_embeddings_flag_replaces_sources() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 8, 2);
    let corpus = textclust::corpus::load_corpus(
        dir.path().join("alpha.jsonl"),
        textclust::corpus::CorpusFormat::Jsonl,
    )
    .unwrap();
    let mut lines = Vec::new();
    for doc in corpus.documents() {
        let class = if doc.label == "class0" { 0.0 } else { 9.0 };
        lines.push(serde_json::json!({"id": doc.id, "vector": [class, 1.0]}).to_string());
    }
    std::fs::write(dir.path().join("override.jsonl"), lines.join("\n")).unwrap();

    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, base_config(dir.path(), "flag-run")).unwrap();

    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--config"])
        .arg(&config_path)
        .arg(format!(
            "--embeddings=file:{}",
            dir.path().join("override.jsonl").display()
        ))
        .args(["--summarise", "off"])
        .status()
        .unwrap();
    assert!(status.success());

    let report =
        textclust::bench::read_run_report(dir.path().join("flag-run/run_report.json")).unwrap();
    // one embedding (the override) x five algorithms
    assert_eq!(report.cells.len(), 5);
    assert!(report.cells.iter().all(|c| c.embedding == "override"));
}

#[test]
fn cli_run_report_and_project_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "alpha", 10, 2);
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, base_config(dir.path(), "cli-run")).unwrap();

    let bench = env!("CARGO_BIN_EXE_bench");
    let status = Command::new(bench)
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert!(status.success());

    let run_dir = dir.path().join("cli-run");
    let csv_before = std::fs::read(run_dir.join("report.csv")).unwrap();
    let status = Command::new(bench)
        .args(["report", "--run-dir"])
        .arg(&run_dir)
        .status()
        .unwrap();
    assert!(status.success());
    // regeneration from run_report.json reproduces the grid CSV exactly
    let csv_after = std::fs::read(run_dir.join("report.csv")).unwrap();
    assert_eq!(csv_before, csv_after);

    // project the first kmeans cell; perplexity must fit the corpus size
    let report = textclust::bench::read_run_report(run_dir.join("run_report.json")).unwrap();
    let cell_id = &report.cells[0].cell_id;
    let status = Command::new(bench)
        .args(["project", "--run-dir"])
        .arg(&run_dir)
        .args([
            "--cell",
            &cell_id[..12],
            "--perplexity",
            "4",
            "--iterations",
            "120",
            "--pca-dims",
            "10",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let short = &cell_id[..12];
    assert!(run_dir.join("projections").join(format!("{short}.csv")).exists());
    assert!(run_dir.join("projections").join(format!("{short}.svg")).exists());
}
