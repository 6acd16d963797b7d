use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::functional::RegParams;
use crate::error::{Error, Result};
use crate::linalg::simplex::{simplex_least_squares, SpectraplexQp};
use crate::manifold::DiscreteManifold;
use crate::speclib::{ConformalFactor, SpectrumSlice};

/// Simplex weights over the lambda_2 cluster and the residual of
/// gamma1 u^N - u^(N-2) sum c_i phi_i^2 - gamma2 u^-eps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EulerCertificate {
    pub params: RegParams,
    /// Sorted in decreasing order.
    pub c: Vec<f64>,
    /// Cluster eigenvectors rotated to diagonalize the fitted weight matrix,
    /// in the order of `c`.
    pub basis: Vec<Vec<f64>>,
    pub residual_l2: f64,
    pub residual_sup: f64,
    /// |gamma1 u^2 - gamma2 u^(2-N-eps) - Phi| in weighted L2, the quantity minimized.
    pub fit_residual: f64,
    /// |gamma1 u^2 - Phi| in weighted L2.
    pub limit_residual: f64,
    pub k_effective: usize,
}

impl EulerCertificate {
    /// Phi = sum c_i phi_i^2
    pub fn phi_sum(&self) -> Vec<f64> {
        let n = self.basis.first().map_or(0, |b| b.len());
        (0..n).map(|i| self.c.iter().zip(&self.basis).map(|(c, b)| c * b[i] * b[i]).sum()).collect()
    }
}

pub fn euler_certificate(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    eps: f64,
    spectrum: &SpectrumSlice,
    c_drop_tol: f64,
) -> Result<EulerCertificate> {
    let cluster = &spectrum.cluster2;
    if cluster.is_empty() {
        return Err(Error::InvalidInput("empty lambda_2 cluster".into()));
    }
    if cluster.len() > spectrum.nu {
        return Err(Error::ClusterTooLarge { dim: cluster.len(), nu: spectrum.nu });
    }
    if eps > 0.0 && !u.is_strictly_positive() {
        let i = u.values().iter().position(|v| *v <= 0.0).unwrap();
        return Err(Error::NotInDomain { node: i, value: u.values()[i] });
    }
    let params = RegParams::compute(m, u, eps, spectrum.lambda2())?;
    let n = u.critical_exponent();
    let w = m.weights();
    let uv = u.values();
    let nodes: Vec<usize> = (0..uv.len()).filter(|&i| spectrum.support[i] && uv[i] > 0.0).collect();
    let target: Vec<f64> = uv
        .iter()
        .map(|&x| {
            if x > 0.0 && params.gamma2 > 0.0 {
                params.gamma1 * x * x - params.gamma2 * x.powf(2.0 - n - eps)
            } else {
                params.gamma1 * x * x
            }
        })
        .collect();
    let vecs = spectrum.cluster_vectors();
    let d = vecs.len();

    // spectraplex fit of sum_ab A_ab phi_a phi_b to the target
    let basis: Vec<Vec<f64>> = if d == 1 {
        vec![vecs[0].to_vec()]
    } else {
        let pair = |a: usize, b: usize, i: usize| vecs[a][i] * vecs[b][i];
        let dd = d * d;
        let mut hess = DMatrix::zeros(dd, dd);
        let mut lin = DVector::zeros(dd);
        for p in 0..dd {
            let (a, b) = (p % d, p / d);
            for q in p..dd {
                let (c, e) = (q % d, q / d);
                let v: f64 = nodes.iter().map(|&i| w[i] * pair(a, b, i) * pair(c, e, i)).sum();
                hess[(p, q)] = v;
                hess[(q, p)] = v;
            }
            lin[p] = -nodes.iter().map(|&i| w[i] * target[i] * pair(a, b, i)).sum::<f64>();
        }
        let fit = SpectraplexQp { d, hessian: hess, linear: lin }.solve(5000);
        let rot = SymmetricEigen::new(fit).eigenvectors;
        (0..d)
            .map(|j| (0..uv.len()).map(|i| (0..d).map(|a| rot[(a, j)] * vecs[a][i]).sum()).collect())
            .collect()
    };

    // exact simplex fit on the rotated squares
    let sq = |a: usize, i: usize| basis[a][i] * basis[a][i];
    let gram = DMatrix::from_fn(d, d, |a, b| nodes.iter().map(|&i| w[i] * sq(a, i) * sq(b, i)).sum::<f64>());
    let rhs = DVector::from_fn(d, |a, _| nodes.iter().map(|&i| w[i] * target[i] * sq(a, i)).sum::<f64>());
    let c = simplex_least_squares(&gram, &rhs);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
    let c: Vec<f64> = order.iter().map(|&a| c[a]).collect();
    let basis: Vec<Vec<f64>> = order.iter().map(|&a| basis[a].clone()).collect();

    let phi: Vec<f64> =
        (0..uv.len()).map(|i| c.iter().zip(&basis).map(|(c, b)| c * b[i] * b[i]).sum()).collect();
    let (mut fit2, mut res2, mut lim2, mut sup) = (0.0, 0.0, 0.0, 0.0f64);
    for &i in &nodes {
        let gap = target[i] - phi[i];
        fit2 += w[i] * gap * gap;
        let r = uv[i].powf(n - 2.0) * gap;
        res2 += w[i] * r * r;
        sup = sup.max(r.abs());
        let l = params.gamma1 * uv[i] * uv[i] - phi[i];
        lim2 += w[i] * l * l;
    }
    Ok(EulerCertificate {
        params,
        k_effective: c.iter().filter(|&&x| x > c_drop_tol).count(),
        c,
        basis,
        residual_l2: res2.sqrt(),
        residual_sup: sup,
        fit_residual: fit2.sqrt(),
        limit_residual: lim2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speclib::{generalized_spectrum, SolverOptions};

    fn product() -> DiscreteManifold {
        let a = DiscreteManifold::build_circle(1.0, 20).unwrap();
        let b = DiscreteManifold::build_circle(0.5, 10).unwrap().with_dim(3);
        DiscreteManifold::product(&a, &b).with_constant_potential(-2.0).unwrap()
    }

    #[test]
    fn constant_factor_on_product_is_extremal_at_the_limit() {
        let m = product();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let s = generalized_spectrum(&m, &u, 3, &SolverOptions::default()).unwrap();
        let cert = euler_certificate(&m, &u, 0.0, &s, 1e-4).unwrap();
        assert_eq!(cert.k_effective, 2);
        assert!((cert.c[0] - 0.5).abs() < 1e-9 && (cert.c[1] - 0.5).abs() < 1e-9);
        assert!(cert.residual_l2 < 1e-10, "{}", cert.residual_l2);
    }

    #[test]
    fn small_eps_residual_is_order_eps() {
        let m = product();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let s = generalized_spectrum(&m, &u, 3, &SolverOptions::default()).unwrap();
        let cert = euler_certificate(&m, &u, 1e-6, &s, 1e-4).unwrap();
        // at u = 1 the whole eps-term is a constant, absorbed up to gamma1 - gamma2 vs Phi = 1
        assert!(cert.residual_l2 < 1e-5);
        assert_eq!(cert.k_effective, 2);
    }

    #[test]
    fn single_cluster_gives_unit_weight() {
        let m = product();
        let v: Vec<f64> = (0..200).map(|i| 1.0 + 0.2 * ((i / 10) as f64 * 0.31).sin()).collect();
        let u = ConformalFactor::new(&m, v).unwrap();
        let s = generalized_spectrum(&m, &u, 3, &SolverOptions::default()).unwrap();
        assert_eq!(s.cluster2.len(), 1);
        let cert = euler_certificate(&m, &u, 0.01, &s, 1e-4).unwrap();
        assert_eq!(cert.c, vec![1.0]);
        assert!(cert.residual_l2 > 1e-4);
    }
}
