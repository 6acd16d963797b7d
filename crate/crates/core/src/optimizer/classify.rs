use serde::{Deserialize, Serialize};

use super::certificate::EulerCertificate;
use crate::manifold::DiscreteManifold;
use crate::speclib::{ConformalFactor, SpectrumSlice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Nodal,
    HarmonicMap,
    Unresolved,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodalCheck {
    /// sqrt(c_1) phi_1, sign-normalized so the largest entry is positive.
    pub phi: Vec<f64>,
    /// |u - |phi||_inf / |u|_inf
    pub sup_error: f64,
    /// |K phi - lambda_2 W |phi|^(N-2) phi| / |K phi|, both in the W^-1 norm.
    pub residual: f64,
    pub sign_change: bool,
    pub max_node_positive: bool,
    pub min_node_negative: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicCheck {
    /// psi_a = sqrt(c_a) phi_a / u on nodes with u > 0, zero elsewhere.
    pub psi: Vec<Vec<f64>>,
    pub sphere_error: f64,
    pub residual: f64,
    /// Nodes where u vanishes; the checks skip them.
    pub excluded_nodes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifyOutcome {
    pub classification: Classification,
    pub k: usize,
    pub nodal: Option<NodalCheck>,
    pub harmonic: Option<HarmonicCheck>,
}

/// Sign change across an edge of the adjacency graph, both ends in the support.
pub fn has_sign_change(m: &DiscreteManifold, phi: &[f64], support: &[bool]) -> bool {
    m.adjacency()
        .iter()
        .enumerate()
        .any(|(i, nb)| support[i] && nb.iter().any(|&j| support[j] && phi[i] * phi[j] < 0.0))
}

pub fn nodal_check(m: &DiscreteManifold, u: &ConformalFactor, lambda2: f64, c1: f64, phi1: &[f64], support: &[bool]) -> NodalCheck {
    let uv = u.values();
    let n = u.critical_exponent();
    let s = c1.sqrt();
    let (imax, _) = phi1.iter().enumerate().fold((0, 0.0f64), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
    let sign = if phi1[imax] < 0.0 { -s } else { s };
    let phi: Vec<f64> = phi1.iter().map(|v| sign * v).collect();
    let umax = u.max();
    let sup_error = uv.iter().zip(&phi).map(|(a, p)| (a - p.abs()).abs()).fold(0.0, f64::max) / umax;
    let w = m.weights();
    let kphi = m.operator().matvec(&phi);
    let (mut r2, mut k2) = (0.0, 0.0);
    for i in 0..phi.len() {
        let rhs = lambda2 * w[i] * phi[i].abs().powf(n - 2.0) * phi[i];
        r2 += (kphi[i] - rhs).powi(2) / w[i];
        k2 += kphi[i] * kphi[i] / w[i];
    }
    let on = |i: usize| support[i];
    let (mut hi, mut lo) = (None::<usize>, None::<usize>);
    for i in (0..phi.len()).filter(|&i| on(i)) {
        if hi.is_none_or(|h| phi[i] > phi[h]) {
            hi = Some(i);
        }
        if lo.is_none_or(|l| phi[i] < phi[l]) {
            lo = Some(i);
        }
    }
    NodalCheck {
        sign_change: has_sign_change(m, &phi, support),
        max_node_positive: hi.is_some_and(|i| phi[i] > 0.0),
        min_node_negative: lo.is_some_and(|i| phi[i] < 0.0),
        residual: if k2 > 0.0 { (r2 / k2).sqrt() } else { r2.sqrt() },
        sup_error,
        phi,
    }
}

/// Discrete weak form of div(u^2 grad psi) + u^2 |grad psi|^2 psi = 0 with
/// edge weights a_ij (u_i^2 + u_j^2)/2.
pub fn harmonic_check(m: &DiscreteManifold, u: &ConformalFactor, c: &[f64], basis: &[Vec<f64>]) -> HarmonicCheck {
    let uv = u.values();
    let nn = uv.len();
    let live: Vec<bool> = uv.iter().map(|v| *v > 0.0).collect();
    let psi: Vec<Vec<f64>> = c
        .iter()
        .zip(basis)
        .map(|(c, b)| (0..nn).map(|i| if live[i] { c.sqrt() * b[i] / uv[i] } else { 0.0 }).collect())
        .collect();
    let sphere_error = (0..nn)
        .filter(|&i| live[i])
        .map(|i| (psi.iter().map(|p| p[i] * p[i]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    let w = m.weights();
    let k = m.stiffness();
    let d = psi.len();
    let mut lap = vec![vec![0.0; nn]; d];
    let mut energy = vec![0.0; nn];
    for i in (0..nn).filter(|&i| live[i]) {
        for (j, kij) in k.row(i) {
            if j == i || !live[j] {
                continue;
            }
            let a = -kij * 0.5 * (uv[i] * uv[i] + uv[j] * uv[j]);
            let mut diff2 = 0.0;
            for (l, p) in psi.iter().enumerate() {
                let dp = p[i] - p[j];
                lap[l][i] += a * dp;
                diff2 += dp * dp;
            }
            energy[i] += 0.5 * a * diff2;
        }
    }
    let (mut r2, mut e2) = (0.0, 0.0);
    for i in (0..nn).filter(|&i| live[i]) {
        for l in 0..d {
            let rhs = energy[i] * psi[l][i];
            r2 += (lap[l][i] - rhs).powi(2) / w[i];
            e2 += rhs * rhs / w[i];
        }
    }
    HarmonicCheck {
        psi,
        sphere_error,
        residual: if e2 > 0.0 { (r2 / e2).sqrt() } else { r2.sqrt() },
        excluded_nodes: live.iter().filter(|l| !**l).count(),
    }
}

/// Assigns the branch from the certificate weights. `tol` bounds the sup
/// errors |u - |phi|| and |sum psi^2 - 1|.
pub fn classify(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    spectrum: &SpectrumSlice,
    cert: &EulerCertificate,
    c_drop_tol: f64,
    tol: f64,
) -> ClassifyOutcome {
    let keep: Vec<usize> = (0..cert.c.len()).filter(|&a| cert.c[a] > c_drop_tol).collect();
    let k = keep.len();
    if k == 1 {
        let a = keep[0];
        let check = nodal_check(m, u, spectrum.lambda2(), cert.c[a], &cert.basis[a], &spectrum.support);
        let ok = check.sign_change && check.sup_error <= tol;
        ClassifyOutcome {
            classification: if ok { Classification::Nodal } else { Classification::Unresolved },
            k,
            nodal: Some(check),
            harmonic: None,
        }
    } else {
        let c: Vec<f64> = keep.iter().map(|&a| cert.c[a]).collect();
        let basis: Vec<Vec<f64>> = keep.iter().map(|&a| cert.basis[a].clone()).collect();
        let check = harmonic_check(m, u, &c, &basis);
        let ok = k >= 2 && check.sphere_error <= tol;
        ClassifyOutcome {
            classification: if ok { Classification::HarmonicMap } else { Classification::Unresolved },
            k,
            nodal: None,
            harmonic: Some(check),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_modes_are_harmonic_for_unit_factor() {
        let a = DiscreteManifold::build_circle(1.0, 24).unwrap();
        let b = DiscreteManifold::build_circle(0.5, 8).unwrap().with_dim(3);
        let m = DiscreteManifold::product(&a, &b);
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let t = |i: usize| (i / 8) as f64 * std::f64::consts::TAU / 24.0;
        let s2 = std::f64::consts::SQRT_2;
        let basis = vec![
            (0..192).map(|i| s2 * t(i).cos()).collect::<Vec<_>>(),
            (0..192).map(|i| s2 * t(i).sin()).collect::<Vec<_>>(),
        ];
        let h = harmonic_check(&m, &u, &[0.5, 0.5], &basis);
        assert!(h.sphere_error < 1e-14);
        assert!(h.residual < 1e-12, "{}", h.residual);
    }

    #[test]
    fn sign_change_detection() {
        let m = DiscreteManifold::build_circle(1.0, 8).unwrap();
        let sup = vec![true; 8];
        assert!(has_sign_change(&m, &[1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0], &sup));
        assert!(!has_sign_change(&m, &[1.0; 8], &sup));
        // opposite signs separated by a dead node do not count
        let mut sup = sup;
        sup[2] = false;
        assert!(!has_sign_change(&m, &[1.0, 1.0, -5.0, 1.0, 1.0, 1.0, 1.0, 1.0], &sup));
    }
}
