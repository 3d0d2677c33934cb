//! Lloyd's k-means with seeded restarts and k-means++ initialisation.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClusterAssignment, ClusterError, KmeansInit, KmeansOpts};
use crate::linalg::squared_distance;

/// One Lloyd run from explicit starting centroids.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia recorded at each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
}

fn nearest_centroid(point: ndarray::ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, centroid) in centroids.outer_iter().enumerate() {
        let dist = squared_distance(point, centroid);
        if dist < best_dist {
            best_dist = dist;
            best = c;
        }
    }
    (best, best_dist)
}

/// Assigns every point to its nearest centroid, then repairs empty
/// clusters by moving in the point currently farthest from its own
/// centroid (never emptying another cluster in the process). Returns the
/// inertia of the final assignment.
fn assign_with_repair(
    x: ArrayView2<'_, f64>,
    centroids: &mut Array2<f64>,
    labels: &mut [usize],
) -> f64 {
    let n = x.nrows();
    let k = centroids.nrows();
    let mut dists = vec![0.0f64; n];
    for i in 0..n {
        let (label, dist) = nearest_centroid(x.row(i), centroids);
        labels[i] = label;
        dists[i] = dist;
    }

    let mut counts = vec![0usize; k];
    for &label in labels.iter() {
        counts[label] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut farthest: Option<usize> = None;
        for i in 0..n {
            if counts[labels[i]] < 2 {
                continue;
            }
            if farthest.is_none_or(|f| dists[i] > dists[f]) {
                farthest = Some(i);
            }
        }
        let i = farthest.expect("a donor cluster with at least two members exists");
        counts[labels[i]] -= 1;
        labels[i] = empty;
        counts[empty] = 1;
        dists[i] = 0.0;
        centroids.row_mut(empty).assign(&x.row(i));
    }
    dists.iter().sum()
}

fn means(x: ArrayView2<'_, f64>, labels: &[usize], k: usize, out: &mut Array2<f64>) {
    let d = x.ncols();
    out.fill(0.0);
    let mut counts = vec![0usize; k];
    for (row, &label) in x.outer_iter().zip(labels) {
        counts[label] += 1;
        for j in 0..d {
            out[[label, j]] += row[j];
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            for j in 0..d {
                out[[c, j]] /= count as f64;
            }
        }
    }
}

/// Lloyd iterations from the given starting centroids until the
/// Frobenius norm of the centroid shift drops below `tol` or `max_iter`
/// is reached.
pub fn lloyd(
    x: ArrayView2<'_, f64>,
    initial_centroids: Array2<f64>,
    max_iter: usize,
    tol: f64,
) -> LloydRun {
    let n = x.nrows();
    let k = initial_centroids.nrows();
    let mut centroids = initial_centroids;
    let mut labels = vec![0usize; n];
    let mut inertia_history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let inertia = assign_with_repair(x, &mut centroids, &mut labels);
        if let Some(&prev) = inertia_history.last() {
            debug_assert!(inertia <= prev + prev.abs() * 1e-12 + 1e-12);
        }
        inertia_history.push(inertia);

        let mut new_centroids = centroids.clone();
        means(x, &labels, k, &mut new_centroids);
        let shift = (&new_centroids - &centroids)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        centroids = new_centroids;
        if shift < tol {
            break;
        }
    }

    // final assignment against the converged centroids
    let inertia = assign_with_repair(x, &mut centroids, &mut labels);
    if let Some(&prev) = inertia_history.last() {
        debug_assert!(inertia <= prev + prev.abs() * 1e-12 + 1e-12);
    }
    inertia_history.push(inertia);

    LloydRun {
        labels,
        centroids,
        inertia,
        iterations,
        inertia_history,
    }
}

/// Draws k distinct data points as starting centroids.
fn random_init(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let indices = sample(rng, x.nrows(), k);
    let mut centroids = Array2::<f64>::zeros((k, x.ncols()));
    for (c, i) in indices.into_iter().enumerate() {
        centroids.row_mut(c).assign(&x.row(i));
    }
    centroids
}

fn pp_init(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::<f64>::zeros((k, x.ncols()));
    let mut chosen = vec![false; n];

    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    chosen[first] = true;

    let mut min_sq = vec![0.0f64; n];
    for (i, w) in min_sq.iter_mut().enumerate() {
        *w = squared_distance(x.row(i), centroids.row(0));
    }

    for c in 1..k {
        let total: f64 = min_sq.iter().sum();
        let next = if total > 0.0 {
            // sample proportionally to the squared distance to the
            // nearest chosen centroid
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in min_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining mass is zero (duplicate points): fall back
            // to a uniform draw over the unchosen indices
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        chosen[next] = true;
        centroids.row_mut(c).assign(&x.row(next));
        for (i, w) in min_sq.iter_mut().enumerate() {
            let dist = squared_distance(x.row(i), centroids.row(c));
            if dist < *w {
                *w = dist;
            }
        }
    }
    centroids
}

/// Seeded k-means++ initialisation: the first centroid is uniform over
/// the points, each following one is sampled with probability
/// proportional to its squared distance to the nearest chosen centroid.
pub fn kmeans_pp_init(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
) -> Result<Array2<f64>, ClusterError> {
    if x.nrows() < k {
        return Err(ClusterError::MoreClustersThanPoints { n: x.nrows(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pp_init(x, k, &mut rng))
}

/// Best of `n_init` seeded Lloyd restarts by inertia.
pub(super) fn kmeans(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    opts: &KmeansOpts,
) -> Result<ClusterAssignment, ClusterError> {
    if opts.n_init == 0 {
        return Err(ClusterError::InvalidParameter("n_init must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..opts.n_init {
        let init = match opts.init {
            KmeansInit::Random => random_init(x, k, &mut rng),
            KmeansInit::PlusPlus => pp_init(x, k, &mut rng),
        };
        let run = lloyd(x, init, opts.max_iter, opts.tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("n_init >= 1");
    Ok(ClusterAssignment {
        hard_labels: best.labels,
        membership: None,
        centroids: best.centroids,
        objective: best.inertia,
        iterations: best.iterations,
    })
}
