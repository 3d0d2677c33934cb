//! Agglomerative hierarchical clustering with the Ward criterion.
//!
//! Merges are chosen to minimise the increase in total within-cluster
//! variance, maintained with Lance-Williams updates; ties go to the
//! smallest `(i, j)` slot pair. The dendrogram is cut once k clusters
//! remain.

use ndarray::{Array2, ArrayView2};

use super::{centroids_from_labels, within_cluster_ss, ClusterAssignment, ClusterError};
use crate::linalg::squared_distance;

/// Ward run with the merge-cost sequence (non-decreasing).
#[derive(Debug, Clone)]
pub struct WardRun {
    pub assignment: ClusterAssignment,
    /// Variance increase of each merge, in merge order.
    pub merge_deltas: Vec<f64>,
}

/// Ward clustering cut at k clusters.
pub fn ahc_ward_full(x: ArrayView2<'_, f64>, k: usize) -> Result<WardRun, ClusterError> {
    let n = x.nrows();
    if k < 2 {
        return Err(ClusterError::KTooSmall(k));
    }
    if n < k {
        return Err(ClusterError::MoreClustersThanPoints { n, k });
    }

    // delta[i][j]: variance increase of merging slots i and j.
    // For singletons this is half the squared distance.
    let mut delta = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 0.5 * squared_distance(x.row(i), x.row(j));
            delta[[i, j]] = d;
            delta[[j, i]] = d;
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<f64> = vec![1.0; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merge_deltas = Vec::with_capacity(n - k);

    for _ in 0..(n - k) {
        // scan in slot order; strict `<` keeps the smallest (i, j) on ties
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let d = delta[[i, j]];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, cost) = best.expect("at least two active clusters");
        merge_deltas.push(cost);

        // Lance-Williams update of the merged cluster's distances
        let (ni, nj) = (size[i], size[j]);
        for l in 0..n {
            if !active[l] || l == i || l == j {
                continue;
            }
            let nl = size[l];
            let updated = ((ni + nl) * delta[[i, l]] + (nj + nl) * delta[[j, l]]
                - nl * delta[[i, j]])
                / (ni + nj + nl);
            delta[[i, l]] = updated;
            delta[[l, i]] = updated;
        }
        size[i] += size[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        active[j] = false;
    }

    // Clusters ordered by slot index; because merges land in the smaller
    // slot, this equals ordering by smallest original member.
    let mut labels = vec![0usize; n];
    let mut cluster = 0;
    for slot in 0..n {
        if !active[slot] {
            continue;
        }
        for &m in &members[slot] {
            labels[m] = cluster;
        }
        cluster += 1;
    }

    let centroids = centroids_from_labels(x, &labels, k);
    let objective = within_cluster_ss(x, &labels, k);
    Ok(WardRun {
        assignment: ClusterAssignment {
            hard_labels: labels,
            membership: None,
            centroids,
            objective,
            iterations: n - k,
        },
        merge_deltas,
    })
}
