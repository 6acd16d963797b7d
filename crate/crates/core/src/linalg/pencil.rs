//! Lowest eigenpairs of a symmetric pencil (K, D) with D diagonal and
//! positive, via the shift-inverted operator (K - sigma D)^{-1} D.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{cholesky_lower, householder, reflect_symmetric, solve_lower, solve_lower_transpose, sym_eigen};
use super::CsrMatrix;
use crate::error::{Error, Result};

/// Eigenpairs in ascending order; vectors are D-orthonormal.
#[derive(Clone, Debug)]
pub struct PencilEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub shift: f64,
    pub iterations: usize,
}

/// |K x - lambda D x| / |x|
pub fn pencil_residual(k: &CsrMatrix, d: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let r: f64 = kx.iter().zip(d).zip(x).map(|((a, di), xi)| (a - lambda * di * xi).powi(2)).sum();
    let xn: f64 = x.iter().map(|v| v * v).sum();
    (r / xn).sqrt()
}

fn d_dot(d: &[f64], a: &[f64], b: &[f64]) -> f64 {
    d.iter().zip(a).zip(b).map(|((di, x), y)| di * x * y).sum()
}

fn dense_of(k: &CsrMatrix) -> Mat<f64> {
    let mut m = Mat::zeros(k.nrows(), k.nrows());
    for (i, j, v) in k.triplets() {
        m[(i, j)] = v;
    }
    m
}

/// Factor K - sigma D, lowering sigma until the factorization succeeds.
fn dense_factor(kd: &Mat<f64>, d: &[f64], mut sigma: f64) -> Result<(Mat<f64>, f64)> {
    for _ in 0..60 {
        let a = Mat::from_fn(d.len(), d.len(), |i, j| kd[(i, j)] - if i == j { sigma * d[i] } else { 0.0 });
        if let Some(l) = cholesky_lower(&a) {
            return Ok((l, sigma));
        }
        sigma -= sigma.abs().max(1.0);
    }
    Err(Error::Factorization("could not find a shift below the spectrum".into()))
}

/// Dense solve. `lower` must bound the smallest eigenvalue from below.
/// `how_many` maps the full ascending spectrum to the number of vectors wanted.
/// With `deflate = Some(phi)` the problem is restricted to the D-orthogonal
/// complement of phi.
pub fn dense_pencil(
    k: &CsrMatrix,
    d: &[f64],
    lower: f64,
    deflate: Option<&[f64]>,
    how_many: impl Fn(&[f64]) -> usize,
) -> Result<PencilEigen> {
    let s = d.len();
    let kd = dense_of(k);
    let (dmin, dmax) = d.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if dmax <= 1e6 * dmin {
        return direct_pencil(&kd, d, deflate, how_many);
    }
    let mut sigma = lower - 1.0;
    for pass in 0..2 {
        let (l, sig) = dense_factor(&kd, d, sigma)?;
        sigma = sig;
        // C = L^{-1} D L^{-T} = X X^T with X = L^{-1} D^{1/2}
        let mut x = Mat::from_fn(s, s, |i, j| if i == j { d[i].sqrt() } else { 0.0 });
        solve_lower(&l, &mut x);
        let c = &x * x.transpose();
        let (mu, z, reflector) = match deflate {
            None => {
                let (mu, z) = sym_eigen(&c)?;
                (mu, z, None)
            }
            Some(phi) => {
                // constraint z^T L^{-1} D phi = 0
                let mut v = Mat::from_fn(s, 1, |i, _| d[i] * phi[i]);
                solve_lower(&l, &mut v);
                let vv: Vec<f64> = (0..s).map(|i| v[(i, 0)]).collect();
                let h = householder(&vv);
                let hc = reflect_symmetric(&c, &h);
                let sub = Mat::from_fn(s - 1, s - 1, |i, j| hc[(i + 1, j + 1)]);
                let (mu, zs) = sym_eigen(&sub)?;
                let z = Mat::from_fn(s, s - 1, |i, j| if i == 0 { 0.0 } else { zs[(i - 1, j)] });
                (mu, z, Some(h))
            }
        };
        let m = mu.len();
        // largest mu is the smallest eigenvalue
        let values: Vec<f64> = (0..m)
            .rev()
            .map(|j| if mu[j] > 0.0 { sigma + 1.0 / mu[j] } else { f64::INFINITY })
            .collect();
        if pass == 0 && values[0].is_finite() && values[0] - sigma > 4.0 {
            sigma = values[0] - 1.0;
            continue;
        }
        let want = how_many(&values).min(m);
        let vectors = (0..want)
            .map(|jj| {
                let j = m - 1 - jj;
                let mut zj: Vec<f64> = (0..s).map(|i| z[(i, j)]).collect();
                if let Some(h) = &reflector {
                    let dot: f64 = h.iter().zip(&zj).map(|(a, b)| a * b).sum();
                    zj.iter_mut().zip(h).for_each(|(zi, hi)| *zi -= 2.0 * dot * hi);
                }
                solve_lower_transpose(&l, &mut zj);
                let nrm = d_dot(d, &zj, &zj).sqrt();
                zj.iter_mut().for_each(|v| *v /= nrm);
                zj
            })
            .collect();
        return Ok(PencilEigen { values, vectors, shift: sigma, iterations: 1 });
    }
    unreachable!()
}

/// Eigen-decomposition of D^{-1/2} K D^{-1/2}; accurate when D is well graded.
fn direct_pencil(
    kd: &Mat<f64>,
    d: &[f64],
    deflate: Option<&[f64]>,
    how_many: impl Fn(&[f64]) -> usize,
) -> Result<PencilEigen> {
    let s = d.len();
    let r: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let b = Mat::from_fn(s, s, |i, j| kd[(i, j)] * r[i] * r[j]);
    let (values, y, reflector) = match deflate {
        None => {
            let (v, y) = sym_eigen(&b)?;
            (v, y, None)
        }
        Some(phi) => {
            let y1: Vec<f64> = phi.iter().zip(d).map(|(p, x)| p * x.sqrt()).collect();
            let h = householder(&y1);
            let hb = reflect_symmetric(&b, &h);
            let sub = Mat::from_fn(s - 1, s - 1, |i, j| hb[(i + 1, j + 1)]);
            let (v, ys) = sym_eigen(&sub)?;
            let y = Mat::from_fn(s, s - 1, |i, j| if i == 0 { 0.0 } else { ys[(i - 1, j)] });
            (v, y, Some(h))
        }
    };
    let want = how_many(&values).min(values.len());
    let vectors = (0..want)
        .map(|j| {
            let mut yj: Vec<f64> = (0..s).map(|i| y[(i, j)]).collect();
            if let Some(h) = &reflector {
                let dot: f64 = h.iter().zip(&yj).map(|(a, b)| a * b).sum();
                yj.iter_mut().zip(h).for_each(|(yi, hi)| *yi -= 2.0 * dot * hi);
            }
            let mut x: Vec<f64> = yj.iter().zip(&r).map(|(a, b)| a * b).collect();
            let nrm = d_dot(d, &x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            x
        })
        .collect();
    Ok(PencilEigen { values, vectors, shift: f64::NEG_INFINITY, iterations: 1 })
}

struct SparseShift {
    llt: Llt<usize, f64>,
    sigma: f64,
}

fn sparse_factor(k: &CsrMatrix, d: &[f64], sigma: f64) -> Option<SparseShift> {
    let neg: Vec<f64> = d.iter().map(|di| -sigma * di).collect();
    let a = k.add_diagonal(&neg).to_faer_lower();
    let llt = a.sp_cholesky(Side::Lower).ok()?;
    Some(SparseShift { llt, sigma })
}

/// D-orthonormalizes columns in place by twice-applied modified Gram-Schmidt.
/// Columns that collapse are replaced by random vectors.
fn d_orthonormalize(d: &[f64], cols: &mut [Vec<f64>], fixed: &[Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..cols.len() {
        for attempt in 0..3 {
            let before = d_dot(d, &cols[j], &cols[j]).sqrt();
            for _ in 0..2 {
                for f in fixed {
                    let p = d_dot(d, f, &cols[j]);
                    cols[j].iter_mut().zip(f).for_each(|(x, y)| *x -= p * y);
                }
                for i in 0..j {
                    let (head, tail) = cols.split_at_mut(j);
                    let p = d_dot(d, &head[i], &tail[0]);
                    tail[0].iter_mut().zip(&head[i]).for_each(|(x, y)| *x -= p * y);
                }
            }
            let after = d_dot(d, &cols[j], &cols[j]).sqrt();
            if after > 1e-10 * before && after > 0.0 {
                cols[j].iter_mut().for_each(|x| *x /= after);
                break;
            }
            assert!(attempt < 2, "could not complete an orthonormal block");
            cols[j].iter_mut().for_each(|x| *x = rng.random::<f64>() - 0.5);
        }
    }
}

pub struct IterativeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// Block shift-and-invert subspace iteration with Rayleigh-Ritz.
/// `how_many` is re-evaluated on converged Ritz values and may request more pairs.
pub fn iterative_pencil(
    k: &CsrMatrix,
    d: &[f64],
    lower: f64,
    deflate: Option<&[f64]>,
    initial: usize,
    how_many: impl Fn(&[f64]) -> usize,
    opts: &IterativeOptions,
) -> Result<PencilEigen> {
    let s = d.len();
    let limit = s - deflate.map_or(0, |_| 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sigma = lower - 1.0;
    let mut shift = loop {
        if let Some(f) = sparse_factor(k, d, sigma) {
            break f;
        }
        sigma -= sigma.abs().max(1.0);
        if sigma < -1e300 {
            return Err(Error::Factorization("no shift below the spectrum".into()));
        }
    };
    let fixed: Vec<Vec<f64>> = deflate.map(|p| vec![p.to_vec()]).unwrap_or_default();
    let mut want = initial.clamp(1, limit);
    let block = |w: usize| (w + w.max(8)).min(limit);
    let mut cols: Vec<Vec<f64>> =
        (0..block(want)).map(|_| (0..s).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    d_orthonormalize(d, &mut cols, &fixed, &mut rng);
    let mut refined = false;
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let p = cols.len();
        let mut rhs = Mat::from_fn(s, p, |i, j| d[i] * cols[j][i]);
        shift.llt.solve_in_place(rhs.as_mut());
        let mut next: Vec<Vec<f64>> = (0..p).map(|j| (0..s).map(|i| rhs[(i, j)]).collect()).collect();
        d_orthonormalize(d, &mut next, &fixed, &mut rng);
        let kx: Vec<Vec<f64>> = next.iter().map(|c| k.matvec(c)).collect();
        let h = Mat::from_fn(p, p, |a, b| {
            let v: f64 = next[a].iter().zip(&kx[b]).map(|(x, y)| x * y).sum();
            let w: f64 = next[b].iter().zip(&kx[a]).map(|(x, y)| x * y).sum();
            0.5 * (v + w)
        });
        let (theta, w) = sym_eigen(&h)?;
        cols = (0..p)
            .map(|j| (0..s).map(|i| (0..p).map(|a| next[a][i] * w[(a, j)]).sum()).collect())
            .collect();
        let kcols: Vec<Vec<f64>> =
            (0..p).map(|j| (0..s).map(|i| (0..p).map(|a| kx[a][i] * w[(a, j)]).sum()).collect()).collect();
        let resid = |j: usize| -> f64 {
            let mut r: Vec<f64> = (0..s).map(|i| kcols[j][i] - theta[j] * d[i] * cols[j][i]).collect();
            if let Some(phi) = deflate {
                let beta: f64 = phi.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(phi).zip(d).for_each(|((ri, pi), di)| *ri -= beta * di * pi);
            }
            let rn: f64 = r.iter().map(|v| v * v).sum();
            let xn: f64 = cols[j].iter().map(|v| v * v).sum();
            (rn / xn).sqrt()
        };
        worst = (0..want).map(resid).fold(0.0, f64::max);
        if !refined && it >= 4 && theta[0] - shift.sigma > 4.0 {
            refined = true;
            if let Some(f) = sparse_factor(k, d, theta[0] - 1.0) {
                shift = f;
            }
        }
        if worst <= opts.tol {
            let need = how_many(&theta[..want]).min(limit);
            if need <= want {
                let values = theta[..need].to_vec();
                let vectors = cols[..need].to_vec();
                return Ok(PencilEigen { values, vectors, shift: shift.sigma, iterations: it });
            }
            want = need;
            while cols.len() < block(want) {
                cols.push((0..s).map(|_| rng.random::<f64>() - 0.5).collect());
            }
            d_orthonormalize(d, &mut cols, &fixed, &mut rng);
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: worst })
}
