//! The five clustering algorithms, all deterministic under a given seed.
//!
//! k-means (random and k-means++ initialisation), Ward agglomerative
//! clustering, fuzzy c-means and spectral clustering with discretized
//! label assignment. Parameter defaults follow the benchmark
//! configuration: k-means restarts 10 times from seed 0, k-means++ once,
//! fuzzy uses m = 2 / error = 0.005 / 1000 iterations, spectral seeds its
//! discretization with 10.

mod fuzzy;
mod kmeans;
mod spectral;
mod ward;

pub use fuzzy::{fuzzy_cmeans_full, fuzzy_cmeans_with_init, memberships_for_point, FuzzyRun};
pub use kmeans::{kmeans_pp_init, lloyd, LloydRun};
pub use spectral::{discretize, normalized_laplacian, rbf_affinity};
pub use ward::{ahc_ward_full, WardRun};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("more clusters ({k}) than points ({n})")]
    MoreClustersThanPoints { n: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("{n} points exceed the dense eigensolve cap of {cap}; subsample the corpus first")]
    DenseEigenCap { n: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Algorithm identifiers. Declaration order doubles as the tie-break
/// order when report rows compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    KmeansPp,
    AhcWard,
    FuzzyCm,
    Spectral,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kmeans,
        Algorithm::KmeansPp,
        Algorithm::AhcWard,
        Algorithm::FuzzyCm,
        Algorithm::Spectral,
    ];

    /// Table-style display name.
    pub fn display_name(&self) -> &'static str {
        match self {
            Algorithm::Kmeans => "k-means",
            Algorithm::KmeansPp => "k-means++",
            Algorithm::AhcWard => "AHC",
            Algorithm::FuzzyCm => "FuzzyCM",
            Algorithm::Spectral => "Spectral",
        }
    }

    /// Identifier used in configs and file names.
    pub fn key(&self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::KmeansPp => "kmeans_pp",
            Algorithm::AhcWard => "ahc_ward",
            Algorithm::FuzzyCm => "fuzzy_cm",
            Algorithm::Spectral => "spectral",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmeansInit {
    Random,
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansOpts {
    pub init: KmeansInit,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyOpts {
    /// Fuzziness exponent, must be > 1.
    pub m: f64,
    /// Stop when the largest membership change falls below this.
    pub error: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOpts {
    /// RBF affinity width: `exp(-gamma * ||xi - xj||^2)`.
    pub gamma: f64,
    /// Guard on the dense eigendecomposition size.
    pub dense_cap: usize,
}

/// Full parameterisation of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub algorithm: Algorithm,
    pub k: usize,
    pub seed: u64,
    pub kmeans: KmeansOpts,
    pub fuzzy: FuzzyOpts,
    pub spectral: SpectralOpts,
}

impl ClusterParams {
    /// Benchmark defaults for the given algorithm: k-means runs 10
    /// seeded restarts, k-means++ one, spectral uses seed 10; fuzzy uses
    /// m = 2, error = 0.005, maxiter = 1000.
    pub fn new(algorithm: Algorithm, k: usize) -> Self {
        let (init, n_init) = match algorithm {
            Algorithm::KmeansPp => (KmeansInit::PlusPlus, 1),
            _ => (KmeansInit::Random, 10),
        };
        let seed = match algorithm {
            Algorithm::Spectral => 10,
            _ => 0,
        };
        Self {
            algorithm,
            k,
            seed,
            kmeans: KmeansOpts {
                init,
                n_init,
                max_iter: 300,
                tol: 1e-4,
            },
            fuzzy: FuzzyOpts {
                m: 2.0,
                error: 0.005,
                max_iter: 1000,
            },
            spectral: SpectralOpts {
                gamma: 1.0,
                dense_cap: 20_000,
            },
        }
    }
}

/// Result of one clustering run.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    /// Hard label in `[0, k)` per input row.
    pub hard_labels: Vec<usize>,
    /// N x k membership matrix; present for fuzzy c-means only.
    pub membership: Option<Array2<f64>>,
    /// k x D centroid matrix. For AHC and spectral these are the
    /// post-hoc cluster means.
    pub centroids: Array2<f64>,
    /// Algorithm objective: k-means inertia, the fuzzy objective, total
    /// within-cluster sum of squares for AHC, the ncut value for
    /// spectral.
    pub objective: f64,
    pub iterations: usize,
}

impl ClusterAssignment {
    /// JSON form: `{"algorithm", "k", "seed", "labels", "membership",
    /// "objective"}`.
    pub fn to_json(&self, params: &ClusterParams) -> serde_json::Value {
        let mut value = serde_json::json!({
            "algorithm": params.algorithm.key(),
            "k": params.k,
            "seed": params.seed,
            "labels": self.hard_labels,
            "objective": self.objective,
        });
        if let Some(membership) = &self.membership {
            let rows: Vec<Vec<f64>> = membership.outer_iter().map(|r| r.to_vec()).collect();
            value["membership"] = serde_json::json!(rows);
        }
        value
    }
}

/// Mean of the rows assigned to each cluster. Empty clusters keep a zero
/// centroid.
pub(crate) fn centroids_from_labels(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
) -> Array2<f64> {
    let d = x.ncols();
    let mut centroids = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (row, &label) in x.outer_iter().zip(labels) {
        counts[label] += 1;
        for (j, &v) in row.iter().enumerate() {
            centroids[[label, j]] += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            for j in 0..d {
                centroids[[c, j]] /= count as f64;
            }
        }
    }
    centroids
}

/// Total within-cluster sum of squared deviations from cluster means.
pub(crate) fn within_cluster_ss(x: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> f64 {
    let centroids = centroids_from_labels(x, labels, k);
    x.outer_iter()
        .zip(labels)
        .map(|(row, &label)| crate::linalg::squared_distance(row, centroids.row(label)))
        .sum()
}

fn check_preconditions(n: usize, k: usize) -> Result<(), ClusterError> {
    if k < 2 {
        return Err(ClusterError::KTooSmall(k));
    }
    if n < k {
        return Err(ClusterError::MoreClustersThanPoints { n, k });
    }
    Ok(())
}

/// Runs the configured algorithm on a row-per-document matrix.
pub fn run(x: ArrayView2<'_, f64>, params: &ClusterParams) -> Result<ClusterAssignment, ClusterError> {
    check_preconditions(x.nrows(), params.k)?;
    match params.algorithm {
        Algorithm::Kmeans | Algorithm::KmeansPp => {
            kmeans::kmeans(x, params.k, params.seed, &params.kmeans)
        }
        Algorithm::AhcWard => ward::ahc_ward_full(x, params.k).map(|run| run.assignment),
        Algorithm::FuzzyCm => {
            fuzzy::fuzzy_cmeans(x, params.k, params.seed, &params.fuzzy)
        }
        Algorithm::Spectral => spectral::spectral(x, params.k, params.seed, &params.spectral),
    }
}
