use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::instances::ProductExample;
use crate::error::{Error, Result};
use crate::speclib::{generalized_spectrum, ConformalFactor, SolverOptions};

/// Quantities entering the key inequality for one factor u.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyTerms {
    pub lambda2: f64,
    /// psi_1^T K psi_1
    pub energy: f64,
    /// int psi_1^2 u^(N-2)
    pub denom: f64,
    /// int psi_1 phi_2 u^(N-2)
    pub alpha: f64,
    /// Whether psi_1 is the sine mode.
    pub sine: bool,
    /// Assembled 2x2 energy and mass matrices on span{psi_1, phi_2}.
    pub e: [[f64; 2]; 2],
    pub g: [[f64; 2]; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyInequalityReport {
    pub terms: KeyTerms,
    pub rhs: f64,
    /// rhs - lambda2
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SweepCase {
    /// Maximum where cos(theta) = 0, with max f = lambda2.
    Boundary { in_low_eigenspaces: bool, residual: f64 },
    Interior { theta_c: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaSweepReport {
    pub terms: KeyTerms,
    pub samples: usize,
    pub sweep_max: f64,
    pub sweep_argmax: f64,
    /// Larger eigenvalue of the assembled 2x2 pencil.
    pub pencil_max: f64,
    /// (E - lambda2 alpha^2) / (denom - alpha^2)
    pub closed_form: f64,
    /// f at tan(theta) = -alpha from the assembled energies.
    pub f_at_critical: f64,
    pub closed_form_error: f64,
    pub case: SweepCase,
    pub holds: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn key_terms(ex: &ProductExample, u: &ConformalFactor, opts: &SolverOptions) -> Result<KeyTerms> {
    if !u.is_strictly_positive() {
        return Err(Error::InvalidInput("key inequality needs a strictly positive factor".into()));
    }
    let m = &ex.manifold;
    let s = generalized_spectrum(m, u, 2, opts)?;
    let d = &s.mass;
    let k = m.operator();
    let pick = |sine: bool| {
        let p = ex.circle_mode(sine);
        let b: f64 = p.iter().zip(d).map(|(x, d)| d * x * x).sum();
        (p, b)
    };
    let (c, bc) = pick(false);
    let (sn, bs) = pick(true);
    let (psi, denom, sine) = if bs < bc { (sn, bs, true) } else { (c, bc, false) };
    let phi2 = &s.eigenvectors[1];
    let kpsi = k.matvec(&psi);
    let kphi = k.matvec(phi2);
    let dpsi: Vec<f64> = psi.iter().zip(d).map(|(x, d)| x * d).collect();
    let dphi: Vec<f64> = phi2.iter().zip(d).map(|(x, d)| x * d).collect();
    let energy = dot(&psi, &kpsi);
    let alpha = dot(&dpsi, phi2);
    let e01 = 0.5 * (dot(&psi, &kphi) + dot(phi2, &kpsi));
    Ok(KeyTerms {
        lambda2: s.lambda2(),
        energy,
        denom,
        alpha,
        sine,
        e: [[energy, e01], [e01, dot(phi2, &kphi)]],
        g: [[denom, alpha], [alpha, dot(&dphi, phi2)]],
    })
}

/// lambda_2(u) <= psi_1^T K psi_1 / int psi_1^2 u^(N-2).
pub fn key_inequality_check(ex: &ProductExample, u: &ConformalFactor, opts: &SolverOptions, tol: f64) -> Result<KeyInequalityReport> {
    let terms = key_terms(ex, u, opts)?;
    let rhs = terms.energy / terms.denom;
    let margin = rhs - terms.lambda2;
    Ok(KeyInequalityReport { holds: margin >= -tol * terms.lambda2.abs(), rhs, margin, terms })
}

fn rayleigh(e: &[[f64; 2]; 2], g: &[[f64; 2]; 2], th: f64) -> f64 {
    let (c, s) = (th.cos(), th.sin());
    let num = c * c * e[0][0] + 2.0 * c * s * e[0][1] + s * s * e[1][1];
    let den = c * c * g[0][0] + 2.0 * c * s * g[0][1] + s * s * g[1][1];
    num / den
}

/// Larger root of det(E - mu G) = 0.
fn pencil_max(e: &[[f64; 2]; 2], g: &[[f64; 2]; 2]) -> f64 {
    let a = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let b = -(e[0][0] * g[1][1] + e[1][1] * g[0][0] - 2.0 * e[0][1] * g[0][1]);
    let c = e[0][0] * e[1][1] - e[0][1] * e[0][1];
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    (-b + disc) / (2.0 * a)
}

/// Rayleigh quotient of cos(theta) psi_1 + sin(theta) phi_2 over a uniform grid.
pub fn theta_sweep(ex: &ProductExample, u: &ConformalFactor, opts: &SolverOptions, samples: usize, tol: f64) -> Result<ThetaSweepReport> {
    let t = key_terms(ex, u, opts)?;
    let (mut sweep_max, mut sweep_argmax) = (f64::NEG_INFINITY, 0.0);
    for i in 0..samples {
        let th = 2.0 * PI * i as f64 / samples as f64;
        let f = rayleigh(&t.e, &t.g, th);
        if f > sweep_max {
            sweep_max = f;
            sweep_argmax = th;
        }
    }
    let pmax = pencil_max(&t.e, &t.g);
    let l2 = t.lambda2;
    let gap = t.denom - t.alpha * t.alpha;
    let closed_form = (t.energy - l2 * t.alpha * t.alpha) / gap;
    let theta_c = (-t.alpha).atan();
    let f_at_critical = rayleigh(&t.e, &t.g, theta_c);
    let scale = l2.abs().max(1.0);
    let closed_form_error = (closed_form - f_at_critical).abs() / scale;
    let case = if closed_form <= l2 + tol * scale || gap <= 1e-12 * t.denom {
        // psi_1 must then lie in the sum of the two lowest eigenspaces
        let s = generalized_spectrum(&ex.manifold, u, 2, opts)?;
        let psi = ex.circle_mode(t.sine);
        let d = &s.mass;
        let mut r = psi.clone();
        for (_, phi) in s.eigenvectors.iter().enumerate().filter(|(j, _)| *j < 2 || s.cluster2.contains(j)) {
            let coef: f64 = phi.iter().zip(&psi).zip(d).map(|((p, x), d)| p * x * d).sum();
            r.iter_mut().zip(phi).for_each(|(r, p)| *r -= coef * p);
        }
        let residual = (r.iter().zip(d).map(|(r, d)| d * r * r).sum::<f64>() / t.denom).sqrt();
        SweepCase::Boundary { in_low_eigenspaces: residual <= tol.sqrt(), residual }
    } else {
        SweepCase::Interior { theta_c }
    };
    let bounded = sweep_max >= l2 - tol * scale && sweep_max <= pmax + tol * scale;
    let holds = bounded
        && match case {
            SweepCase::Boundary { in_low_eigenspaces, .. } => in_low_eigenspaces,
            SweepCase::Interior { .. } => closed_form <= pmax + tol * scale,
        };
    Ok(ThetaSweepReport {
        terms: t,
        samples,
        sweep_max,
        sweep_argmax,
        pencil_max: pmax,
        closed_form,
        f_at_critical,
        closed_form_error,
        case,
        holds,
    })
}
