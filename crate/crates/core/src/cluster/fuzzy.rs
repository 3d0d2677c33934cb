//! Fuzzy c-means: soft memberships with fuzziness exponent m.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClusterAssignment, ClusterError, FuzzyOpts};
use crate::linalg::distance;

/// Fuzzy run with per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct FuzzyRun {
    pub assignment: ClusterAssignment,
    /// Objective `sum u^m d^2` after each update; non-increasing.
    pub objective_history: Vec<f64>,
    /// Largest deviation of any membership row sum from 1 seen across
    /// all iterations.
    pub max_row_sum_deviation: f64,
    pub converged: bool,
}

/// Membership row of one point against the given centroids:
/// `u_j = 1 / sum_l (d_j / d_l)^(2/(m-1))`. A point coinciding with one
/// or more centroids takes the limit value: membership split equally
/// over the coinciding centroids, zero elsewhere.
pub fn memberships_for_point(
    point: ArrayView1<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    m: f64,
) -> Vec<f64> {
    let k = centroids.nrows();
    let dists: Vec<f64> = (0..k)
        .map(|j| distance(point, centroids.row(j)))
        .collect();
    let zero_hits = dists.iter().filter(|&&d| d == 0.0).count();
    if zero_hits > 0 {
        return dists
            .iter()
            .map(|&d| if d == 0.0 { 1.0 / zero_hits as f64 } else { 0.0 })
            .collect();
    }
    let exponent = 2.0 / (m - 1.0);
    (0..k)
        .map(|j| {
            let total: f64 = (0..k)
                .map(|l| (dists[j] / dists[l]).powf(exponent))
                .sum();
            1.0 / total
        })
        .collect()
}

fn random_membership(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut u = Array2::<f64>::zeros((n, k));
    for mut row in u.outer_iter_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            // keep entries strictly positive so the first centroid step
            // never divides by zero
            *v = rng.random::<f64>() + 1e-9;
            sum += *v;
        }
        row.mapv_inplace(|v| v / sum);
    }
    u
}

fn weighted_centroids(
    x: ArrayView2<'_, f64>,
    u: &Array2<f64>,
    m: f64,
    centroids: &mut Array2<f64>,
) {
    let (n, k) = u.dim();
    let d = x.ncols();
    for j in 0..k {
        let mut weight_sum = 0.0;
        let mut acc = vec![0.0f64; d];
        for i in 0..n {
            let w = u[[i, j]].powf(m);
            weight_sum += w;
            for (a, &v) in acc.iter_mut().zip(x.row(i).iter()) {
                *a += w * v;
            }
        }
        if weight_sum > 0.0 {
            for (col, a) in acc.into_iter().enumerate() {
                centroids[[j, col]] = a / weight_sum;
            }
        }
        // zero total weight leaves the previous centroid in place
    }
}

/// Fuzzy c-means from an explicit initial membership matrix.
pub fn fuzzy_cmeans_with_init(
    x: ArrayView2<'_, f64>,
    initial_membership: Array2<f64>,
    opts: &FuzzyOpts,
) -> Result<FuzzyRun, ClusterError> {
    let n = x.nrows();
    let k = initial_membership.ncols();
    if initial_membership.nrows() != n {
        return Err(ClusterError::InvalidParameter(
            "membership rows must match point count".into(),
        ));
    }
    if opts.m <= 1.0 {
        return Err(ClusterError::InvalidParameter("m must be > 1".into()));
    }
    if opts.error <= 0.0 {
        return Err(ClusterError::InvalidParameter("error must be > 0".into()));
    }

    let mut u = initial_membership;
    let mut centroids = Array2::<f64>::zeros((k, x.ncols()));
    let mut objective_history = Vec::new();
    let mut max_row_sum_deviation = 0.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        weighted_centroids(x, &u, opts.m, &mut centroids);

        let mut new_u = Array2::<f64>::zeros((n, k));
        let mut max_delta = 0.0f64;
        let mut objective = 0.0;
        for i in 0..n {
            let row = memberships_for_point(x.row(i), centroids.view(), opts.m);
            let row_sum: f64 = row.iter().sum();
            max_row_sum_deviation = max_row_sum_deviation.max((row_sum - 1.0).abs());
            for (j, &value) in row.iter().enumerate() {
                max_delta = max_delta.max((value - u[[i, j]]).abs());
                new_u[[i, j]] = value;
                let d = distance(x.row(i), centroids.row(j));
                objective += value.powf(opts.m) * d * d;
            }
        }
        u = new_u;
        objective_history.push(objective);

        if max_delta < opts.error {
            converged = true;
            break;
        }
    }

    let hard_labels: Vec<usize> = u
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_value = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if v > best_value {
                    best_value = v;
                    best = j;
                }
            }
            best
        })
        .collect();
    let objective = objective_history.last().copied().unwrap_or(0.0);

    Ok(FuzzyRun {
        assignment: ClusterAssignment {
            hard_labels,
            membership: Some(u),
            centroids,
            objective,
            iterations,
        },
        objective_history,
        max_row_sum_deviation,
        converged,
    })
}

/// Fuzzy c-means with seeded random membership initialisation,
/// returning the per-iteration diagnostics.
pub fn fuzzy_cmeans_full(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    opts: &FuzzyOpts,
) -> Result<FuzzyRun, ClusterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = random_membership(x.nrows(), k, &mut rng);
    fuzzy_cmeans_with_init(x, u0, opts)
}

pub(super) fn fuzzy_cmeans(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    opts: &FuzzyOpts,
) -> Result<ClusterAssignment, ClusterError> {
    fuzzy_cmeans_full(x, k, seed, opts).map(|run| run.assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn opts() -> FuzzyOpts {
        FuzzyOpts {
            m: 2.0,
            error: 0.005,
            max_iter: 1000,
        }
    }

    #[test]
    fn point_on_centroid_takes_full_membership() {
        let centroids = arr2(&[[1.0, 1.0], [5.0, 5.0]]);
        let u = memberships_for_point(arr2(&[[1.0, 1.0]]).row(0), centroids.view(), 2.0);
        assert_eq!(u, vec![1.0, 0.0]);
    }

    #[test]
    fn probe_point_between_symmetric_centroids_is_half_half() {
        let x = arr2(&[[-1.0], [1.0]]);
        let run = fuzzy_cmeans(x.view(), 2, 0, &opts()).unwrap();
        let probe = arr2(&[[0.0]]);
        let u = memberships_for_point(probe.row(0), run.centroids.view(), 2.0);
        assert!((u[0] - 0.5).abs() < 1e-6);
        assert!((u[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn separated_pairs_get_crisp_hard_labels() {
        let x = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
        let run = fuzzy_cmeans(x.view(), 2, 0, &opts()).unwrap();
        assert_eq!(run.hard_labels[0], run.hard_labels[1]);
        assert_eq!(run.hard_labels[2], run.hard_labels[3]);
        assert_ne!(run.hard_labels[0], run.hard_labels[2]);
    }

    #[test]
    fn membership_rows_sum_to_one_every_iteration() {
        let x = arr2(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 1.0], [5.0, 5.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u0 = random_membership(5, 2, &mut rng);
        let run = fuzzy_cmeans_with_init(x.view(), u0, &opts()).unwrap();
        assert!(run.max_row_sum_deviation < 1e-6);
        for pair in run.objective_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
    }

    #[test]
    fn fixed_point_matches_independent_solver() {
        // independent oracle: iterate the coupled updates from a crisp
        // start until the memberships stop moving (1e-12), then compare
        let x = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
        let m = 2.0;

        let mut u = arr2(&[
            [0.9, 0.1],
            [0.9, 0.1],
            [0.1, 0.9],
            [0.1, 0.9],
        ]);
        for _ in 0..10_000 {
            // centroid step
            let mut centroids = [[0.0f64; 1]; 2];
            for j in 0..2 {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..4 {
                    let w = u[[i, j]] * u[[i, j]];
                    num += w * x[[i, 0]];
                    den += w;
                }
                centroids[j][0] = num / den;
            }
            // membership step
            let mut new_u = u.clone();
            for i in 0..4 {
                let d0 = (x[[i, 0]] - centroids[0][0]).abs();
                let d1 = (x[[i, 0]] - centroids[1][0]).abs();
                new_u[[i, 0]] = 1.0 / (1.0 + (d0 / d1).powi(2));
                new_u[[i, 1]] = 1.0 / (1.0 + (d1 / d0).powi(2));
            }
            let delta = (&new_u - &u).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            u = new_u;
            if delta < 1e-12 {
                break;
            }
        }

        // run the implementation to tight convergence so the comparison
        // tests the update equations rather than the stopping rule
        let tight = FuzzyOpts {
            m,
            error: 1e-10,
            max_iter: 10_000,
        };
        let run = fuzzy_cmeans(x.view(), 2, 0, &tight).unwrap();
        let got = run.membership.unwrap();
        // align cluster order by the first point's dominant cluster
        let (a, b) = if got[[0, 0]] > got[[0, 1]] { (0, 1) } else { (1, 0) };
        for i in 0..4 {
            assert!((got[[i, a]] - u[[i, 0]]).abs() < 1e-4, "row {i}");
            assert!((got[[i, b]] - u[[i, 1]]).abs() < 1e-4, "row {i}");
        }
        assert_eq!(run.hard_labels[0], run.hard_labels[1]);
        assert_ne!(run.hard_labels[0], run.hard_labels[2]);
    }
}
