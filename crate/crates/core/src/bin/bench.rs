//! Benchmark CLI: run an experiment grid, regenerate reports, export
//! 2-D projections.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use textclust::bench::{
    self, read_run_report, write_grid_csv, write_markdown, ExperimentConfig,
};
use textclust::project::{ProjectionConfig, TsneConfig};

#[derive(Parser)]
#[command(name = "bench", about = "Text clustering benchmark runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment grid described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's LLM cache directory.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Worker threads for clustering cells (0 = physical cores).
        #[arg(long)]
        parallelism: Option<usize>,
        /// Replace the config's embedding sources with a single one:
        /// `file:PATH` (JSONL vectors, `{dataset}` substituted) or
        /// `http:URL` (OpenAI-style endpoint).
        #[arg(long)]
        embeddings: Option<String>,
        /// Force the summarisation stage on or off, overriding the config.
        #[arg(long, value_parser = ["on", "off"])]
        summarise: Option<String>,
    },
    /// Regenerate report.csv and report.md from a finished run.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Export the Fig.-1-style PCA + t-SNE projection of one cell.
    Project {
        #[arg(long, default_value = ".")]
        run_dir: PathBuf,
        /// Cell id (prefix) as listed in run_report.json.
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 50)]
        pca_dims: usize,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 200.0)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_embeddings_flag(spec: &str) -> anyhow::Result<textclust::bench::EmbeddingSpec> {
    use textclust::bench::{EmbeddingKind, EmbeddingSpec};
    use textclust::llm::{EmbeddingSourceKind, HttpEndpoint};

    if let Some(path) = spec.strip_prefix("file:") {
        let path = PathBuf::from(path);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".to_string());
        return Ok(EmbeddingSpec {
            name: name.clone(),
            kind: EmbeddingKind::External(textclust::bench::config::EmbeddingSourceTemplate {
                kind: EmbeddingSourceKind::File { path },
                model_name: name,
                family: None,
            }),
            family: None,
        });
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        // accept both `http:https://host/path` and a bare `http://host/path`
        let url = if rest.starts_with("//") {
            spec.to_string()
        } else {
            rest.to_string()
        };
        return Ok(EmbeddingSpec {
            name: "http".to_string(),
            kind: EmbeddingKind::External(textclust::bench::config::EmbeddingSourceTemplate {
                kind: EmbeddingSourceKind::Http(HttpEndpoint {
                    url,
                    model_id: "default".to_string(),
                    api_key_env: None,
                    batch_size: 32,
                }),
                model_name: "http".to_string(),
                family: None,
            }),
            family: None,
        });
    }
    anyhow::bail!("--embeddings expects `file:PATH` or `http:URL`, got `{spec}`")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            cache_dir,
            parallelism,
            embeddings,
            summarise,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(dir) = output_dir {
                cfg.run.output_dir = dir;
            }
            if let Some(dir) = cache_dir {
                cfg.run.cache_dir = dir;
            }
            if let Some(threads) = parallelism {
                cfg.run.parallelism = threads;
            }
            if let Some(spec) = embeddings {
                cfg.embeddings = vec![parse_embeddings_flag(&spec)?];
            }
            match summarise.as_deref() {
                Some("off") => cfg.summarise = None,
                Some("on") if cfg.summarise.is_none() => anyhow::bail!(
                    "--summarise on needs a [summarise] section in the config"
                ),
                _ => {}
            }
            let outcome = bench::run_grid(&cfg)?;
            let total = outcome.report.cells.len();
            println!(
                "{total} cells: {} computed, {} from cache, {} failed",
                outcome.computed, outcome.from_cache, outcome.failed
            );
            for note in &outcome.report.notes {
                println!("note: {note}");
            }
            println!("reports written to {}", outcome.run_dir.display());
            Ok(if outcome.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { run_dir } => {
            let report = read_run_report(run_dir.join("run_report.json"))?;
            let cfg = ExperimentConfig::load(run_dir.join("config.toml"))?;
            write_grid_csv(&report.cells, run_dir.join("report.csv"))?;
            write_markdown(&report, &bench::families(&cfg), run_dir.join("report.md"))?;
            println!(
                "rewrote {} and {}",
                run_dir.join("report.csv").display(),
                run_dir.join("report.md").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Project {
            run_dir,
            cell,
            pca_dims,
            perplexity,
            iterations,
            learning_rate,
            seed,
        } => {
            let cfg = ProjectionConfig {
                pca_dims,
                tsne: TsneConfig {
                    perplexity,
                    iterations,
                    learning_rate,
                    seed,
                },
            };
            let (csv_path, svg_path) = bench::project_cell(&run_dir, &cell, &cfg)?;
            println!("wrote {} and {}", csv_path.display(), svg_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
