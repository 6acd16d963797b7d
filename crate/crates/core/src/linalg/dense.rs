use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("dense eigensolver: {e:?}")))?;
    let s = eig.S().column_vector();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let vals = order.iter().map(|&i| s[i]).collect();
    let u = eig.U();
    let vecs = Mat::from_fn(a.nrows(), a.nrows(), |i, j| u[(i, order[j])]);
    Ok((vals, vecs))
}

/// Lower Cholesky factor, or `None` when `a` is not numerically positive definite.
pub fn cholesky_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    let l = llt.L();
    Some(Mat::from_fn(a.nrows(), a.ncols(), |i, j| if i >= j { l[(i, j)] } else { 0.0 }))
}

/// Solves L X = B in place.
pub fn solve_lower(l: &Mat<f64>, b: &mut Mat<f64>) {
    solve_lower_triangular_in_place(l.as_ref(), b.as_mut(), Par::Seq);
}

/// Solves L^T x = b for a single right-hand side.
pub fn solve_lower_transpose(l: &Mat<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Householder reflector H = I - 2 v v^T with H y = -sign(y_0) |y| e_0.
pub fn householder(y: &[f64]) -> Vec<f64> {
    let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = y.to_vec();
    let sign = if y[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * norm;
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if vn > 0.0 {
        v.iter_mut().for_each(|x| *x /= vn);
    }
    v
}

/// H A H for symmetric A and H = I - 2 v v^T.
pub fn reflect_symmetric(a: &Mat<f64>, v: &[f64]) -> Mat<f64> {
    let n = a.nrows();
    // p = A v, K = v^T A v
    let p: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * v[j]).sum()).collect();
    let k: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
    // H A H = A - 2 v p^T - 2 p v^T + 4 K v v^T
    Mat::from_fn(n, n, |i, j| a[(i, j)] - 2.0 * v[i] * p[j] - 2.0 * p[i] * v[j] + 4.0 * k * v[i] * v[j])
}
