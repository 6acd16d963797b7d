//! Least squares over the probability simplex and over the spectraplex
//! (symmetric PSD matrices of unit trace).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Euclidean projection onto {x >= 0, sum x = 1}.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub fn project_spectraplex(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = project_simplex(eig.eigenvalues.as_slice());
    let d = DMatrix::from_diagonal(&DVector::from_vec(vals));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Minimizes 1/2 c^T G c - g^T c over the simplex with a primal active-set
/// method. A tiny multiple of |c|^2 is added so that ties resolve toward the
/// uniform vector.
pub fn simplex_least_squares(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let d = rhs.len();
    assert!(d > 0 && gram.nrows() == d && gram.ncols() == d);
    if d == 1 {
        return DVector::from_element(1, 1.0);
    }
    let scale = gram.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut g = gram.clone();
    for i in 0..d {
        g[(i, i)] += 1e-12 * scale;
    }
    let mut c = DVector::from_element(d, 1.0 / d as f64);
    let mut fixed = vec![false; d];

    for _ in 0..(10 * d + 20) {
        let free: Vec<usize> = (0..d).filter(|&i| !fixed[i]).collect();
        let nf = free.len();
        // KKT system on the free set with the sum-to-one multiplier
        let mut kkt = DMatrix::zeros(nf + 1, nf + 1);
        let mut b = DVector::zeros(nf + 1);
        for (p, &i) in free.iter().enumerate() {
            for (q, &j) in free.iter().enumerate() {
                kkt[(p, q)] = g[(i, j)];
            }
            kkt[(p, nf)] = 1.0;
            kkt[(nf, p)] = 1.0;
            b[p] = rhs[i];
        }
        b[nf] = 1.0;
        let sol = kkt.lu().solve(&b).unwrap_or_else(|| {
            let mut u = DVector::from_element(nf + 1, 1.0 / nf as f64);
            u[nf] = 0.0;
            u
        });
        let mut target = DVector::zeros(d);
        for (p, &i) in free.iter().enumerate() {
            target[i] = sol[p];
        }
        let step = &target - &c;
        if step.amax() <= 1e-15 {
            // multipliers of the fixed bounds
            let grad = &g * &c - rhs;
            let nu = -sol[nf];
            let mut worst = None;
            let mut worst_val = -1e-14 * scale;
            for i in 0..d {
                if fixed[i] {
                    let mult = grad[i] - nu;
                    if mult < worst_val {
                        worst_val = mult;
                        worst = Some(i);
                    }
                }
            }
            match worst {
                Some(i) => fixed[i] = false,
                None => break,
            }
        } else {
            let mut alpha = 1.0;
            let mut block = None;
            for &i in &free {
                if step[i] < 0.0 {
                    let a = -c[i] / step[i];
                    if a < alpha {
                        alpha = a;
                        block = Some(i);
                    }
                }
            }
            c += step * alpha;
            if let Some(i) = block {
                c[i] = 0.0;
                fixed[i] = true;
            }
        }
    }
    c.iter_mut().for_each(|v| *v = v.max(0.0));
    let s = c.sum();
    c / s
}

/// Convex quadratic in a symmetric d x d matrix A, written on the d^2 entries
/// of vec(A) (column-major): 1/2 vec(A)^T H vec(A) + l^T vec(A).
pub struct SpectraplexQp {
    pub d: usize,
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl SpectraplexQp {
    pub fn value(&self, a: &DMatrix<f64>) -> f64 {
        let x = DVector::from_column_slice(a.as_slice());
        0.5 * x.dot(&(&self.hessian * &x)) + self.linear.dot(&x)
    }

    fn gradient(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let x = DVector::from_column_slice(a.as_slice());
        let g = &self.hessian * &x + &self.linear;
        let g = DMatrix::from_column_slice(self.d, self.d, g.as_slice());
        (&g + g.transpose()) * 0.5
    }

    /// Accelerated projected gradient with backtracking.
    pub fn solve(&self, max_iter: usize) -> DMatrix<f64> {
        let d = self.d;
        let mut a = DMatrix::identity(d, d) / d as f64;
        if d == 1 {
            return a;
        }
        let mut y = a.clone();
        let mut t = 1.0f64;
        let mut lip = self.hessian.norm().max(1e-300);
        for _ in 0..max_iter {
            let fy = self.value(&y);
            let gy = self.gradient(&y);
            let next = loop {
                let cand = project_spectraplex(&(&y - &gy * (1.0 / lip)));
                let diff = &cand - &y;
                let bound = fy + gy.dot(&diff) + 0.5 * lip * diff.norm_squared();
                if self.value(&cand) <= bound + 1e-15 * fy.abs().max(1.0) || lip > 1e300 {
                    break cand;
                }
                lip *= 2.0;
            };
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let moved = (&next - &a).amax();
            // gradient-based momentum restart
            if (&y - &next).dot(&(&next - &a)) > 0.0 {
                y = next.clone();
                t = 1.0;
            } else {
                y = &next + (&next - &a) * ((t - 1.0) / t_next);
                t = t_next;
            }
            a = next;
            if moved < 1e-15 {
                break;
            }
        }
        a
    }
}
