//! 2-D projections for embedding visualisation: PCA for preliminary
//! reduction, then exact t-SNE.
//!
//! The t-SNE here is the exact O(N^2) algorithm: per-row Gaussian
//! bandwidths found by binary search until the conditional entropy hits
//! `ln(perplexity)`, symmetrized affinities, Student-t low-dimensional
//! kernel, and gradient descent with momentum (0.5, then 0.8 after
//! iteration 250), adaptive per-coordinate gains and 12x early
//! exaggeration for the first 250 iterations. Corpora beyond
//! [`TSNE_MAX_POINTS`] points are expected to be subsampled per class
//! first ([`subsample_per_class`]).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{pairwise_sq_distances, thin_svd};
use crate::vectorize::VectorSet;

/// Practical ceiling for the exact t-SNE.
pub const TSNE_MAX_POINTS: usize = 5000;

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("requested {dims} components but the data rank is {rank}")]
    DimsExceedRank { dims: usize, rank: usize },
    #[error("perplexity {perplexity} infeasible for {n} points (needs perplexity < (n-1)/3)")]
    PerplexityInfeasible { perplexity: f64, n: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("{n} points exceed the exact t-SNE cap of {cap}; subsample per class first")]
    TooManyPoints { n: usize, cap: usize },
    #[error("nothing to export")]
    NothingToExport,
    #[error("labels length {labels} does not match point count {points}")]
    LabelMismatch { labels: usize, points: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// PCA scores plus per-component explained-variance ratios.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub scores: Array2<f64>,
    /// Ratio of total variance per kept component, non-increasing.
    pub explained_variance: Vec<f64>,
}

/// Projects centered rows onto the top `dims` right singular vectors.
/// Component signs are fixed by making each component's
/// largest-magnitude loading positive.
pub fn pca(x: ArrayView2<'_, f64>, dims: usize) -> Result<PcaResult, ProjectError> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 {
        return Err(ProjectError::TooFewPoints { need: 1, got: 0 });
    }

    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let centered = Array2::from_shape_fn((n, d), |(i, j)| x[[i, j]] - mean[j]);
    let (_, s, mut v_t) = thin_svd(centered.view());

    let tol = s.first().copied().unwrap_or(0.0) * n.max(d) as f64 * f64::EPSILON;
    let rank = s.iter().filter(|&&v| v > tol).count();
    if dims > rank {
        return Err(ProjectError::DimsExceedRank { dims, rank });
    }

    for j in 0..dims {
        let mut max_abs = 0.0;
        let mut negative = false;
        for &v in v_t.row(j).iter() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                negative = v < 0.0;
            }
        }
        if negative {
            v_t.row_mut(j).mapv_inplace(|v| -v);
        }
    }

    let mut scores = Array2::<f64>::zeros((n, dims));
    for i in 0..n {
        for j in 0..dims {
            scores[[i, j]] = centered
                .row(i)
                .iter()
                .zip(v_t.row(j).iter())
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    let total: f64 = s.iter().map(|v| v * v).sum();
    let explained_variance = if total > 0.0 {
        s.iter().take(dims).map(|v| v * v / total).collect()
    } else {
        vec![0.0; dims]
    };
    Ok(PcaResult {
        scores,
        explained_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// t-SNE output with diagnostics for the contracts: the per-row
/// precision found by the bandwidth search and the KL divergence
/// recorded every 50 iterations (against the unexaggerated P).
#[derive(Debug, Clone)]
pub struct TsneResult {
    pub coords: Array2<f64>,
    /// `beta_i = 1/(2 sigma_i^2)` per row.
    pub bandwidths: Vec<f64>,
    /// `(iteration, KL(P||Q))` pairs.
    pub kl_checkpoints: Vec<(usize, f64)>,
}

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MIN_PROB: f64 = 1e-12;

/// Conditional entropy (nats) and normalized probabilities of row `i`
/// for precision `beta`, written into `p_row`. Distances are shifted by
/// their minimum before exponentiation so large inputs cannot underflow
/// the whole row.
fn row_entropy(sq_dists: &Array2<f64>, i: usize, beta: f64, p_row: &mut [f64]) -> f64 {
    let n = p_row.len();
    let mut min_dist = f64::INFINITY;
    for j in 0..n {
        if j != i {
            min_dist = min_dist.min(sq_dists[[i, j]]);
        }
    }
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for j in 0..n {
        if j == i {
            p_row[j] = 0.0;
            continue;
        }
        let w = (-beta * (sq_dists[[i, j]] - min_dist)).exp();
        p_row[j] = w;
        sum += w;
        weighted += sq_dists[[i, j]] * w;
    }
    for p in p_row.iter_mut() {
        *p /= sum;
    }
    beta * (weighted / sum - min_dist) + sum.ln()
}

/// Binary search for the precision that makes the conditional entropy of
/// row `i` equal `target` (ln perplexity).
fn search_bandwidth(sq_dists: &Array2<f64>, i: usize, target: f64, p_row: &mut [f64]) -> f64 {
    let mut beta = 1.0;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    for _ in 0..200 {
        let entropy = row_entropy(sq_dists, i, beta, p_row);
        let diff = entropy - target;
        if diff.abs() < 1e-7 {
            break;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_infinite() {
                beta * 2.0
            } else {
                (beta + beta_max) / 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_infinite() {
                beta / 2.0
            } else {
                (beta + beta_min) / 2.0
            };
        }
    }
    beta
}

/// Exact t-SNE to 2 dimensions.
pub fn tsne(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<TsneResult, ProjectError> {
    let n = x.nrows();
    if n < 4 {
        return Err(ProjectError::TooFewPoints { need: 4, got: n });
    }
    if n > TSNE_MAX_POINTS {
        return Err(ProjectError::TooManyPoints {
            n,
            cap: TSNE_MAX_POINTS,
        });
    }
    if cfg.perplexity <= 0.0 || !cfg.perplexity.is_finite()
        || cfg.perplexity >= (n - 1) as f64 / 3.0
    {
        return Err(ProjectError::PerplexityInfeasible {
            perplexity: cfg.perplexity,
            n,
        });
    }

    let sq_dists = pairwise_sq_distances(x);
    let target = cfg.perplexity.ln();
    let mut conditional = Array2::<f64>::zeros((n, n));
    let mut bandwidths = vec![0.0f64; n];
    let mut p_row = vec![0.0f64; n];
    for i in 0..n {
        bandwidths[i] = search_bandwidth(&sq_dists, i, target, &mut p_row);
        row_entropy(&sq_dists, i, bandwidths[i], &mut p_row);
        for j in 0..n {
            conditional[[i, j]] = p_row[j];
        }
    }

    // symmetrize: p_ij = (p_{j|i} + p_{i|j}) / 2N
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = (conditional[[i, j]] + conditional[[j, i]]) / (2.0 * n as f64);
                p[[i, j]] = v.max(MIN_PROB);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Array2::<f64>::zeros((n, 2));
    for v in y.iter_mut() {
        *v = normal.sample(&mut rng);
    }

    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::from_elem((n, 2), 1.0);
    let mut q_weights = Array2::<f64>::zeros((n, n));
    let mut kl_checkpoints = Vec::new();

    for iter in 0..cfg.iterations {
        // Student-t kernel in the embedding
        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dy0 = y[[i, 0]] - y[[j, 0]];
                let dy1 = y[[i, 1]] - y[[j, 1]];
                let w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                q_weights[[i, j]] = w;
                q_weights[[j, i]] = w;
                z += 2.0 * w;
            }
        }

        let exaggeration = if iter < EXAGGERATION_ITERS {
            EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < EXAGGERATION_ITERS {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };

        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q_weights[[i, j]];
                let q = (w / z).max(MIN_PROB);
                let factor = 4.0 * (exaggeration * p[[i, j]] - q) * w;
                grad[0] += factor * (y[[i, 0]] - y[[j, 0]]);
                grad[1] += factor * (y[[i, 1]] - y[[j, 1]]);
            }
            for c in 0..2 {
                let same_direction = (grad[c] > 0.0) == (velocity[[i, c]] > 0.0);
                gains[[i, c]] = if same_direction {
                    (gains[[i, c]] * 0.8).max(0.01)
                } else {
                    gains[[i, c]] + 0.2
                };
                velocity[[i, c]] =
                    momentum * velocity[[i, c]] - cfg.learning_rate * gains[[i, c]] * grad[c];
            }
        }
        y += &velocity;
        for c in 0..2 {
            let mean = y.column(c).sum() / n as f64;
            y.column_mut(c).mapv_inplace(|v| v - mean);
        }

        if (iter + 1) % 50 == 0 || iter + 1 == cfg.iterations {
            let kl = kl_divergence(&p, &y);
            kl_checkpoints.push((iter + 1, kl));
        }
    }

    Ok(TsneResult {
        coords: y,
        bandwidths,
        kl_checkpoints,
    })
}

/// `KL(P||Q)` of the current embedding against the unexaggerated P.
fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let n = y.nrows();
    let mut z = 0.0;
    let mut weights = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dy0 = y[[i, 0]] - y[[j, 0]];
            let dy1 = y[[i, 1]] - y[[j, 1]];
            let w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
            weights[[i, j]] = w;
            weights[[j, i]] = w;
            z += 2.0 * w;
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[[i, j]];
                let qij = (weights[[i, j]] / z).max(MIN_PROB);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub pca_dims: usize,
    pub tsne: TsneConfig,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            pca_dims: 50,
            tsne: TsneConfig::default(),
        }
    }
}

/// 2-D projection aligned to document ids, with the explained-variance
/// ratios of the PCA stage.
#[derive(Debug, Clone)]
pub struct Projection2D {
    pub coords: Array2<f64>,
    pub row_ids: Vec<String>,
    pub explained_variance: Vec<f64>,
}

/// PCA (capped at the data rank) followed by t-SNE.
pub fn project(vectors: &VectorSet, cfg: &ProjectionConfig) -> Result<Projection2D, ProjectError> {
    let x = vectors.matrix();
    let dims = cfg.pca_dims.min(x.ncols()).min(x.nrows());
    // never ask for more than the data can give
    let rank_capped = {
        let (_, s, _) = thin_svd(x.view());
        let tol =
            s.first().copied().unwrap_or(0.0) * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
        dims.min(s.iter().filter(|&&v| v > tol).count()).max(1)
    };
    let pca_result = pca(x, rank_capped)?;
    let tsne_result = tsne(pca_result.scores.view(), &cfg.tsne)?;
    Ok(Projection2D {
        coords: tsne_result.coords,
        row_ids: vectors.row_ids().to_vec(),
        explained_variance: pca_result.explained_variance,
    })
}

/// Stratified subsample: keeps class proportions (at least one point per
/// class), seeded; returns the kept row indices in ascending order.
pub fn subsample_per_class(labels: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if n <= cap {
        return (0..n).collect();
    }
    let n_classes = labels.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        members[label].push(i);
    }

    let mut quota: Vec<usize> = members
        .iter()
        .map(|m| ((m.len() * cap) / n).max(usize::from(!m.is_empty())))
        .collect();
    // trim any overshoot from the largest quotas
    while quota.iter().sum::<usize>() > cap {
        let largest = (0..n_classes).max_by_key(|&c| quota[c]).unwrap();
        quota[largest] -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(cap);
    for (class, class_members) in members.iter().enumerate() {
        let take = quota[class].min(class_members.len());
        if take == 0 {
            continue;
        }
        let picks = rand::seq::index::sample(&mut rng, class_members.len(), take);
        for pick in picks {
            keep.push(class_members[pick]);
        }
    }
    keep.sort_unstable();
    keep
}

/// Writes the projection as CSV (`id,x,y,label`) and an SVG scatter with
/// one colour per label.
pub fn export_projection(
    projection: &Projection2D,
    labels: &[String],
    csv_path: impl AsRef<Path>,
    svg_path: impl AsRef<Path>,
) -> Result<(), ProjectError> {
    let n = projection.coords.nrows();
    if n == 0 {
        return Err(ProjectError::NothingToExport);
    }
    if labels.len() != n {
        return Err(ProjectError::LabelMismatch {
            labels: labels.len(),
            points: n,
        });
    }

    let csv_path = csv_path.as_ref();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ProjectError::Io {
            path: path.clone(),
            source,
        }
    };
    let mut writer = BufWriter::new(File::create(csv_path).map_err(io(csv_path))?);
    writeln!(writer, "id,x,y,label").map_err(io(csv_path))?;
    for (i, label) in labels.iter().enumerate() {
        writeln!(
            writer,
            "{},{},{},{label}",
            projection.row_ids[i],
            projection.coords[[i, 0]],
            projection.coords[[i, 1]],
        )
        .map_err(io(csv_path))?;
    }
    writer.flush().map_err(io(csv_path))?;

    let svg_path = svg_path.as_ref();
    let svg = render_svg(projection, labels);
    std::fs::write(svg_path, svg).map_err(io(svg_path))?;
    Ok(())
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn render_svg(projection: &Projection2D, labels: &[String]) -> String {
    let n = projection.coords.nrows();
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    let color_of = |label: &String| {
        let idx = classes.iter().position(|c| *c == label).unwrap_or(0);
        PALETTE[idx % PALETTE.len()]
    };

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        min_x = min_x.min(projection.coords[[i, 0]]);
        max_x = max_x.max(projection.coords[[i, 0]]);
        min_y = min_y.min(projection.coords[[i, 1]]);
        max_y = max_y.max(projection.coords[[i, 1]]);
    }
    let span_x = (max_x - min_x).max(f64::MIN_POSITIVE);
    let span_y = (max_y - min_y).max(f64::MIN_POSITIVE);

    let size = 640.0;
    let margin = 40.0;
    let scale_x = (size - 2.0 * margin) / span_x;
    let scale_y = (size - 2.0 * margin) / span_y;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, label) in labels.iter().enumerate() {
        let cx = margin + (projection.coords[[i, 0]] - min_x) * scale_x;
        // flip y so larger values plot higher
        let cy = size - margin - (projection.coords[[i, 1]] - min_y) * scale_y;
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.75\"/>\n",
            color_of(label)
        ));
    }
    for (row, class) in classes.iter().enumerate() {
        let y = 16.0 + 16.0 * row as f64;
        svg.push_str(&format!(
            "<circle cx=\"12\" cy=\"{:.1}\" r=\"4\" fill=\"{}\"/><text x=\"22\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>\n",
            y,
            color_of(class),
            y + 4.0,
            escape_xml(class)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
