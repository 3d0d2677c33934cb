//! Small dense linear-algebra helpers shared by the clustering and
//! projection code: pairwise distances, symmetric eigendecomposition and
//! thin SVD (both delegated to nalgebra).

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Full N x N matrix of pairwise squared Euclidean distances.
pub fn pairwise_sq_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = squared_distance(x.row(i), x.row(j));
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().copied())
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix. Returns eigenvalues in
/// ascending order with eigenvectors in the corresponding columns, each
/// sign-fixed so its largest-magnitude entry is positive.
pub fn symmetric_eigen_ascending(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let eig = to_nalgebra(a).symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut max_abs = 0.0;
        let mut sign = 1.0;
        for &entry in v.iter() {
            if entry.abs() > max_abs {
                max_abs = entry.abs();
                sign = if entry < 0.0 { -1.0 } else { 1.0 };
            }
        }
        for row in 0..n {
            vectors[[row, col]] = sign * v[row];
        }
    }
    (values, vectors)
}

/// Thin SVD `a = u * diag(s) * v_t` with singular values in descending
/// order. `u` is N x r and `v_t` is r x D with r = min(N, D).
pub fn thin_svd(a: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let svd = to_nalgebra(a).svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = Array1::from_iter(svd.singular_values.iter().copied());
    (from_nalgebra(&u), s, from_nalgebra(&v_t))
}
