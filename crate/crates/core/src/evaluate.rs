//! Cluster-to-class mapping and the five evaluation metrics: weighted F1,
//! adjusted Rand index, homogeneity, silhouette and Calinski-Harabasz.
//!
//! F1 is computed on labels mapped into class space (each derived cluster
//! is assigned the ground-truth class with the nearest centroid, which
//! may map two clusters onto one class); ARI and homogeneity are
//! permutation-invariant and use the raw predicted labels; silhouette and
//! Calinski-Harabasz are internal and use the raw labels plus the vectors.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::linalg::distance;

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error("label slices have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("silhouette undefined for {clusters} clusters on {points} points")]
    SilhouetteUndefined { clusters: usize, points: usize },
    #[error("calinski-harabasz undefined for {clusters} clusters on {points} points")]
    ChiUndefined { clusters: usize, points: usize },
}

/// How derived clusters are matched to ground-truth classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingStrategy {
    /// Each cluster independently takes the class with the nearest
    /// centroid; two clusters may share a class.
    #[default]
    NearestCentroid,
    /// Optimal one-to-one assignment of clusters to classes by total
    /// centroid distance; surplus clusters (k > C) fall back to the
    /// nearest class.
    OptimalOneToOne,
}

/// Assignment of derived clusters to ground-truth classes.
#[derive(Debug, Clone)]
pub struct LabelMapping {
    /// Class id per cluster id.
    pub cluster_to_class: Vec<usize>,
    /// k x C matrix of centroid distances.
    pub distances: Array2<f64>,
}

impl LabelMapping {
    /// Rewrites predicted cluster labels into class-id space.
    pub fn apply(&self, predicted: &[usize]) -> Vec<usize> {
        predicted.iter().map(|&c| self.cluster_to_class[c]).collect()
    }
}

fn class_centroids(x: ArrayView2<'_, f64>, labels: &[usize], count: usize) -> (Array2<f64>, Vec<usize>) {
    let d = x.ncols();
    let mut centroids = Array2::<f64>::zeros((count, d));
    let mut sizes = vec![0usize; count];
    for (row, &label) in x.outer_iter().zip(labels) {
        sizes[label] += 1;
        for (j, &v) in row.iter().enumerate() {
            centroids[[label, j]] += v;
        }
    }
    for (c, &size) in sizes.iter().enumerate() {
        if size > 0 {
            for j in 0..d {
                centroids[[c, j]] /= size as f64;
            }
        }
    }
    (centroids, sizes)
}

/// Maps each derived cluster to the ground-truth class whose centroid is
/// nearest in Euclidean distance (ties to the smallest class id). Empty
/// derived clusters are logged and skipped; no point carries their label.
pub fn map_clusters(
    x: ArrayView2<'_, f64>,
    predicted: &[usize],
    k: usize,
    truth: &[usize],
    n_classes: usize,
    strategy: MappingStrategy,
) -> Result<LabelMapping, EvaluateError> {
    if predicted.len() != truth.len() {
        return Err(EvaluateError::LengthMismatch(predicted.len(), truth.len()));
    }
    let (cluster_centroids, cluster_sizes) = class_centroids(x, predicted, k);
    let (truth_centroids, _) = class_centroids(x, truth, n_classes);

    let mut distances = Array2::<f64>::zeros((k, n_classes));
    for c in 0..k {
        for t in 0..n_classes {
            distances[[c, t]] = distance(cluster_centroids.row(c), truth_centroids.row(t));
        }
    }

    let mut cluster_to_class: Vec<usize> = (0..k)
        .map(|c| nearest_class(distances.view(), c))
        .collect();

    if strategy == MappingStrategy::OptimalOneToOne {
        let n = k.max(n_classes);
        let mut padded = Array2::<f64>::zeros((n, n));
        padded
            .slice_mut(ndarray::s![0..k, 0..n_classes])
            .assign(&distances);
        let assignment = hungarian_min_cost(&padded);
        for c in 0..k {
            if assignment[c] < n_classes {
                cluster_to_class[c] = assignment[c];
            }
            // surplus clusters keep their nearest-centroid class
        }
    }

    for (c, &size) in cluster_sizes.iter().enumerate() {
        if size == 0 {
            log::warn!("derived cluster {c} is empty; skipped in label mapping");
        }
    }
    Ok(LabelMapping {
        cluster_to_class,
        distances,
    })
}

fn nearest_class(distances: ArrayView2<'_, f64>, cluster: usize) -> usize {
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (t, &d) in distances.row(cluster).iter().enumerate() {
        if d < best_distance {
            best_distance = d;
            best = t;
        }
    }
    best
}

/// Minimum-cost perfect assignment on a square cost matrix
/// (shortest-augmenting-path formulation with potentials). Returns the
/// assigned column per row.
fn hungarian_min_cost(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // row matched to column j; 0 = free
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched[0] = row;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            result[matched[j] - 1] = j - 1;
        }
    }
    result
}

/// Weighted F1 over classes: per-class F1 from the confusion matrix,
/// weighted by class support. Classes without true or predicted positives
/// contribute zero.
pub fn f1_weighted(truth: &[usize], mapped: &[usize]) -> Result<f64, EvaluateError> {
    if truth.len() != mapped.len() {
        return Err(EvaluateError::LengthMismatch(truth.len(), mapped.len()));
    }
    if truth.is_empty() {
        return Err(EvaluateError::TooFewPoints { need: 1, got: 0 });
    }
    let n_classes = truth
        .iter()
        .chain(mapped.iter())
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(mapped) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let n = truth.len() as f64;
    let mut total = 0.0;
    for c in 0..n_classes {
        let support = tp[c] + fn_[c];
        if support == 0 {
            continue;
        }
        let denominator = 2 * tp[c] + fp[c] + fn_[c];
        let f1 = if denominator == 0 {
            0.0
        } else {
            2.0 * tp[c] as f64 / denominator as f64
        };
        total += support as f64 / n * f1;
    }
    Ok(total)
}

fn comb2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index via the contingency-table form; permutation
/// invariant, so raw cluster labels are fine.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, EvaluateError> {
    if a.len() != b.len() {
        return Err(EvaluateError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvaluateError::TooFewPoints { need: 2, got: n });
    }
    let a_max = a.iter().max().unwrap() + 1;
    let b_max = b.iter().max().unwrap() + 1;
    let mut contingency = vec![vec![0usize; b_max]; a_max];
    let mut a_sizes = vec![0usize; a_max];
    let mut b_sizes = vec![0usize; b_max];
    for (&x, &y) in a.iter().zip(b) {
        contingency[x][y] += 1;
        a_sizes[x] += 1;
        b_sizes[y] += 1;
    }
    let sum_comb: f64 = contingency
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| comb2(c))
        .sum();
    let sum_a: f64 = a_sizes.iter().map(|&c| comb2(c)).sum();
    let sum_b: f64 = b_sizes.iter().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denominator = max_index - expected;
    if denominator == 0.0 {
        // both partitions are at the same degenerate extreme
        return Ok(1.0);
    }
    Ok((sum_comb - expected) / denominator)
}

fn entropy_from_counts(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity `1 - H(C|K)/H(C)` with entropies in nats; defined as 1
/// when the truth has a single class.
pub fn homogeneity(truth: &[usize], predicted: &[usize]) -> Result<f64, EvaluateError> {
    if truth.len() != predicted.len() {
        return Err(EvaluateError::LengthMismatch(truth.len(), predicted.len()));
    }
    let n = truth.len();
    if n == 0 {
        return Err(EvaluateError::TooFewPoints { need: 1, got: 0 });
    }
    let c_max = truth.iter().max().unwrap() + 1;
    let k_max = predicted.iter().max().unwrap() + 1;
    let mut class_counts = vec![0usize; c_max];
    let mut joint = vec![vec![0usize; c_max]; k_max];
    let mut cluster_counts = vec![0usize; k_max];
    for (&c, &k) in truth.iter().zip(predicted) {
        class_counts[c] += 1;
        cluster_counts[k] += 1;
        joint[k][c] += 1;
    }
    let h_c = entropy_from_counts(&class_counts, n);
    if h_c == 0.0 {
        return Ok(1.0);
    }
    let mut h_c_given_k = 0.0;
    for (k, row) in joint.iter().enumerate() {
        if cluster_counts[k] == 0 {
            continue;
        }
        let p_k = cluster_counts[k] as f64 / n as f64;
        h_c_given_k += p_k * entropy_from_counts(row, cluster_counts[k]);
    }
    Ok(1.0 - h_c_given_k / h_c)
}

fn present_clusters(labels: &[usize]) -> Vec<usize> {
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    present
}

/// Mean silhouette over all points: `s(i) = (b - a) / max(a, b)` with
/// Euclidean distances; singletons contribute 0.
pub fn silhouette(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, EvaluateError> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(EvaluateError::LengthMismatch(labels.len(), n));
    }
    let clusters = present_clusters(labels);
    let k = clusters.len();
    if k < 2 || k >= n {
        return Err(EvaluateError::SilhouetteUndefined {
            clusters: k,
            points: n,
        });
    }
    let id_of: std::collections::HashMap<usize, usize> = clusters
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let compact: Vec<usize> = labels.iter().map(|l| id_of[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &compact {
        sizes[c] += 1;
    }

    let mut total = 0.0;
    for i in 0..n {
        if sizes[compact[i]] == 1 {
            continue; // singleton: s(i) = 0
        }
        let mut dist_sums = vec![0.0f64; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            dist_sums[compact[j]] += distance(x.row(i), x.row(j));
        }
        let own = compact[i];
        let a = dist_sums[own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && sizes[c] > 0 {
                b = b.min(dist_sums[c] / sizes[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Calinski-Harabasz index `Tr(B)/Tr(W) * (N-k)/(k-1)`. All-point-mass
/// clusters (zero within-cluster dispersion) report +inf with a warning.
pub fn calinski_harabasz(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, EvaluateError> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(EvaluateError::LengthMismatch(labels.len(), n));
    }
    let clusters = present_clusters(labels);
    let k = clusters.len();
    if k < 2 || k >= n {
        return Err(EvaluateError::ChiUndefined {
            clusters: k,
            points: n,
        });
    }
    let id_of: std::collections::HashMap<usize, usize> = clusters
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let compact: Vec<usize> = labels.iter().map(|l| id_of[l]).collect();

    let d = x.ncols();
    let (centroids, sizes) = class_centroids(x, &compact, k);
    let mut global = vec![0.0f64; d];
    for row in x.outer_iter() {
        for (j, &v) in row.iter().enumerate() {
            global[j] += v;
        }
    }
    for g in global.iter_mut() {
        *g /= n as f64;
    }

    let mut between = 0.0;
    for c in 0..k {
        let mut sq = 0.0;
        for j in 0..d {
            let diff = centroids[[c, j]] - global[j];
            sq += diff * diff;
        }
        between += sizes[c] as f64 * sq;
    }
    let mut within = 0.0;
    for (row, &c) in x.outer_iter().zip(&compact) {
        let mut sq = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let diff = v - centroids[[c, j]];
            sq += diff * diff;
        }
        within += sq;
    }
    if within == 0.0 {
        log::warn!("within-cluster dispersion is zero; calinski-harabasz reported as +inf");
        return Ok(f64::INFINITY);
    }
    Ok(between / within * (n - k) as f64 / (k - 1) as f64)
}

/// The five scores for one (dataset, embedding, algorithm) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1s: f64,
    pub ari: f64,
    pub hs: f64,
    pub ss: f64,
    #[serde(with = "non_finite")]
    pub chi: f64,
}

/// JSON cannot hold IEEE infinities; encode a non-finite CHI as a string.
mod non_finite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            value.serialize(serializer)
        } else if value.is_nan() {
            "nan".serialize(serializer)
        } else if *value > 0.0 {
            "inf".serialize(serializer)
        } else {
            "-inf".serialize(serializer)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(v),
            Raw::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "not a float value: {other}"
                ))),
            },
        }
    }
}

/// Scores one cell: F1 on mapped labels, ARI/HS on raw labels, SS/CHI on
/// raw labels plus the vectors.
pub fn score_cell(
    x: ArrayView2<'_, f64>,
    assignment: &ClusterAssignment,
    truth: &[usize],
    n_classes: usize,
    strategy: MappingStrategy,
) -> Result<MetricReport, EvaluateError> {
    let predicted = &assignment.hard_labels;
    let k = assignment.centroids.nrows();
    let mapping = map_clusters(x, predicted, k, truth, n_classes, strategy)?;
    let mapped = mapping.apply(predicted);
    Ok(MetricReport {
        f1s: f1_weighted(truth, &mapped)?,
        ari: adjusted_rand_index(truth, predicted)?,
        hs: homogeneity(truth, predicted)?,
        ss: silhouette(x, predicted)?,
        chi: calinski_harabasz(x, predicted)?,
    })
}
