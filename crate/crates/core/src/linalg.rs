//! Small dense helpers on `&[f64]` slices.

use nalgebra::{DMatrix, SymmetricEigen};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance `|a - b|`.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a / |a|`, or `None` when `|a|` is zero or not finite.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let r = norm(a);
    if r > 0.0 && r.is_finite() {
        Some(a.iter().map(|x| x / r).collect())
    } else {
        None
    }
}

/// Orthogonalizes `v` against the orthonormal `basis` (two passes of
/// modified Gram–Schmidt) and returns the residual.
pub fn orthogonalize(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for u in basis {
            let c = dot(u, &r);
            for (ri, ui) in r.iter_mut().zip(u) {
                *ri -= c * ui;
            }
        }
    }
    r
}

/// Greedy orthonormal basis of `span(vectors)`. A vector is dropped when
/// its residual after orthogonalization is below `rel_tol · |v|`.
pub fn orthonormal_span(vectors: &[&[f64]], rel_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let len = norm(v);
        if len == 0.0 {
            continue;
        }
        let r = orthogonalize(&basis, v);
        let rl = norm(&r);
        if rl > rel_tol * len {
            basis.push(r.iter().map(|x| x / rl).collect());
        }
    }
    basis
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `m^p` for a symmetric positive-definite `m`, via eigen-decomposition.
pub fn spd_power(m: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let (values, vectors) = sorted_eigen(m);
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| vectors[(i, j)] * values[j].powf(p));
    let out = &scaled * vectors.transpose();
    symmetrize(&out)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_drops_dependent_vectors() {
        let a = [1.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        let c = [1.0, 1.0, 0.0];
        let basis = orthonormal_span(&[&a, &b, &c], 1e-9);
        assert_eq!(basis.len(), 2);
        assert!((dot(&basis[0], &basis[1])).abs() < 1e-15);
    }

    #[test]
    fn inverse_square_root() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = spd_power(&m, -0.5);
        assert!((r[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((r[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
        assert!(r[(0, 1)].abs() < 1e-14);
    }
}
