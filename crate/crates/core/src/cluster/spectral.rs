//! Spectral clustering: RBF affinity, symmetric normalized Laplacian,
//! and seeded discretization of the spectral embedding.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{centroids_from_labels, ClusterAssignment, ClusterError, SpectralOpts};
use crate::linalg::{pairwise_sq_distances, symmetric_eigen_ascending, thin_svd};

/// `A_ij = exp(-gamma * ||xi - xj||^2)`; symmetric with unit diagonal.
pub fn rbf_affinity(x: ArrayView2<'_, f64>, gamma: f64) -> Array2<f64> {
    let mut a = pairwise_sq_distances(x);
    a.mapv_inplace(|d| (-gamma * d).exp());
    a
}

/// Symmetric normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
pub fn normalized_laplacian(affinity: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = affinity.nrows();
    let degree: Array1<f64> = affinity.rows().into_iter().map(|r| r.sum()).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let normalized = affinity[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
            l[[i, j]] = if i == j { 1.0 - normalized } else { -normalized };
        }
    }
    l
}

/// Rounds a spectral embedding to hard labels by alternating SVD and
/// row-wise argmax against a rotation matrix; the seed picks the rows
/// that initialise the rotation. Returns the labels and the final ncut
/// objective value.
pub fn discretize(
    embedding: ArrayView2<'_, f64>,
    seed: u64,
) -> Result<(Vec<usize>, f64, usize), ClusterError> {
    let n = embedding.nrows();
    let k = embedding.ncols();
    let mut vectors = embedding.to_owned();

    // scale columns to norm sqrt(n) and fix their sign by the first entry
    let norm_ones = (n as f64).sqrt();
    for mut col in vectors.columns_mut() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let flip = if col[0] != 0.0 && col[0] > 0.0 { -1.0 } else { 1.0 };
            col.mapv_inplace(|v| flip * v / norm * norm_ones);
        }
    }
    // project rows onto the unit hypersphere
    for mut row in vectors.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_restarts = 30;
    let max_rounds = 20;
    let eps = f64::EPSILON;

    for _restart in 0..max_restarts {
        // initial rotation from rows that are mutually far apart
        let mut rotation = Array2::<f64>::zeros((k, k));
        let first = rng.random_range(0..n);
        for r in 0..k {
            rotation[[r, 0]] = vectors[[first, r]];
        }
        let mut c = vec![0.0f64; n];
        for j in 1..k {
            let mut pick = 0;
            let mut pick_value = f64::INFINITY;
            for i in 0..n {
                let dot: f64 = (0..k).map(|r| vectors[[i, r]] * rotation[[r, j - 1]]).sum();
                c[i] += dot.abs();
                if c[i] < pick_value {
                    pick_value = c[i];
                    pick = i;
                }
            }
            for r in 0..k {
                rotation[[r, j]] = vectors[[pick, r]];
            }
        }

        let mut last_objective = 0.0f64;
        let mut labels = vec![0usize; n];
        for round in 1..=max_rounds {
            // rotate and round to the nearest partition matrix
            for (i, row) in vectors.rows().into_iter().enumerate() {
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for j in 0..k {
                    let value: f64 = (0..k).map(|r| row[r] * rotation[[r, j]]).sum();
                    if value > best_value {
                        best_value = value;
                        best = j;
                    }
                }
                labels[i] = best;
            }
            // t = indicator(labels)^T vectors, a k x k matrix
            let mut t = Array2::<f64>::zeros((k, k));
            for (i, &label) in labels.iter().enumerate() {
                for r in 0..k {
                    t[[label, r]] += vectors[[i, r]];
                }
            }
            let (u, s, v_t) = thin_svd(t.view());
            if s.iter().any(|v| !v.is_finite()) {
                break; // restart with a fresh random rotation
            }
            let ncut = 2.0 * (n as f64 - s.sum());
            if (ncut - last_objective).abs() < eps || round == max_rounds {
                return Ok((labels, ncut, round));
            }
            last_objective = ncut;
            // rotation = V U^T (both k x k)
            for r in 0..k {
                for j in 0..k {
                    rotation[[r, j]] = (0..k).map(|m| v_t[[m, r]] * u[[j, m]]).sum();
                }
            }
        }
    }
    Err(ClusterError::InvalidParameter(
        "discretization did not converge".into(),
    ))
}

pub(super) fn spectral(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    opts: &SpectralOpts,
) -> Result<ClusterAssignment, ClusterError> {
    let n = x.nrows();
    if n > opts.dense_cap {
        return Err(ClusterError::DenseEigenCap {
            n,
            cap: opts.dense_cap,
        });
    }
    if opts.gamma <= 0.0 {
        return Err(ClusterError::InvalidParameter("gamma must be > 0".into()));
    }

    let affinity = rbf_affinity(x, opts.gamma);
    let laplacian = normalized_laplacian(affinity.view());
    let (_, eigenvectors) = symmetric_eigen_ascending(laplacian.view());
    let embedding = eigenvectors.slice(ndarray::s![.., 0..k]);

    let (hard_labels, ncut, rounds) = discretize(embedding, seed)?;
    let centroids = centroids_from_labels(x, &hard_labels, k);
    Ok(ClusterAssignment {
        hard_labels,
        membership: None,
        centroids,
        objective: ncut,
        iterations: rounds,
    })
}
