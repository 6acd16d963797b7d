//! Multiplicative deformations u_t = u (1 + t h) and the one-sided
//! derivatives of lambda_2 along them.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::DiscreteManifold;
use crate::speclib::{generalized_spectrum, ConformalFactor, SolverOptions, SpectrumSlice};

#[derive(Clone, Debug)]
pub struct Deformation {
    base: ConformalFactor,
    h: Vec<f64>,
    t_max: f64,
}

impl Deformation {
    pub fn new(base: ConformalFactor, h: Vec<f64>, t_max: f64) -> Result<Self> {
        if h.len() != base.len() {
            return Err(Error::InvalidInput("h does not match the factor".into()));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("h must be finite".into()));
        }
        let hmax = sup_norm(&h);
        if !(t_max > 0.0) || t_max * hmax >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "need 0 < t_max and t_max * max|h| < 1, got t_max = {t_max}, max|h| = {hmax}"
            )));
        }
        Ok(Self { base, h, t_max })
    }

    /// Largest admissible t_max, shrunk by `safety` in (0, 1).
    pub fn with_safety(base: ConformalFactor, h: Vec<f64>, safety: f64) -> Result<Self> {
        let hmax = sup_norm(&h);
        let t_max = if hmax > 0.0 { safety / hmax } else { 1.0 };
        Self::new(base, h, t_max)
    }

    pub fn base(&self) -> &ConformalFactor {
        &self.base
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn deform(&self, t: f64) -> Result<ConformalFactor> {
        if t.abs() > self.t_max {
            return Err(Error::OutOfRange { t, t_max: self.t_max });
        }
        let v = self.base.values().iter().zip(&self.h).map(|(u, h)| u * (1.0 + t * h)).collect();
        self.base.with_values(v)
    }
}

fn sup_norm(h: &[f64]) -> f64 {
    h.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn mass_of(m: &DiscreteManifold, u: &ConformalFactor) -> Vec<f64> {
    let q = u.weight_exponent();
    m.weights().iter().zip(u.values()).map(|(w, v)| w * v.powf(q)).collect()
}

/// -(N-2) R(phi) * int h phi^2 u^(N-2) / int phi^2 u^(N-2).
pub fn l_h_value(m: &DiscreteManifold, u: &ConformalFactor, phi: &[f64], h: &[f64]) -> Result<f64> {
    let d = mass_of(m, u);
    let norm: f64 = d.iter().zip(phi).map(|(d, p)| d * p * p).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("phi has zero weighted norm (it lives on the dead set)".into()));
    }
    let rayleigh = m.operator().quadratic_form(phi) / norm;
    let q: f64 = d.iter().zip(phi).zip(h).map(|((d, p), h)| d * p * p * h).sum();
    Ok(-u.weight_exponent() * rayleigh * q / norm)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativePair {
    pub right: f64,
    pub left: f64,
    pub attaining_right: Vec<f64>,
    pub attaining_left: Vec<f64>,
}

/// One-sided derivatives from an already computed spectrum of u.
pub fn one_sided_from_spectrum(s: &SpectrumSlice, u: &ConformalFactor, h: &[f64]) -> Result<DerivativePair> {
    if s.cluster2.is_empty() {
        return Err(Error::InvalidInput("empty lambda_2 cluster".into()));
    }
    let vecs = s.cluster_vectors();
    let k = vecs.len();
    let q = DMatrix::from_fn(k, k, |a, b| {
        (0..h.len()).map(|i| s.mass[i] * h[i] * vecs[a][i] * vecs[b][i]).sum::<f64>()
    });
    let eig = SymmetricEigen::new(q);
    let (mut lo, mut hi) = (0, 0);
    for j in 0..k {
        if eig.eigenvalues[j] < eig.eigenvalues[lo] {
            lo = j;
        }
        if eig.eigenvalues[j] > eig.eigenvalues[hi] {
            hi = j;
        }
    }
    let factor = -u.weight_exponent() * s.lambda2();
    let combine = |j: usize| -> Vec<f64> {
        (0..h.len()).map(|i| (0..k).map(|a| eig.eigenvectors[(a, j)] * vecs[a][i]).sum()).collect()
    };
    let (vr, vl) = if factor >= 0.0 { (lo, hi) } else { (hi, lo) };
    Ok(DerivativePair {
        right: factor * eig.eigenvalues[vr],
        left: factor * eig.eigenvalues[vl],
        attaining_right: combine(vr),
        attaining_left: combine(vl),
    })
}

pub fn one_sided_derivatives(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    h: &[f64],
    opts: &SolverOptions,
) -> Result<DerivativePair> {
    let s = generalized_spectrum(m, u, 3, opts)?;
    one_sided_from_spectrum(&s, u, h)
}

/// The default t list 0.1 * 2^-k, k = 0..6.
pub fn default_t_list() -> Vec<f64> {
    (0..7).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

/// Least-squares slope of log y against log x over the positive entries.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FdSample {
    pub t: f64,
    pub slope: f64,
    pub formula: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FdReport {
    pub right: f64,
    pub left: f64,
    pub samples: Vec<FdSample>,
    pub max_deviation: f64,
    /// max over samples of deviation / |t|
    pub constant: f64,
    /// Fitted order of the deviation in t, one-sided minimum; `None` when
    /// every deviation is at rounding level.
    pub order: Option<f64>,
}

/// Compares one-sided finite differences of lambda_2 with the derivative
/// formula, from the right for t > 0 and from the left for -t.
pub fn fd_derivative_check(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    h: &[f64],
    t_list: &[f64],
    opts: &SolverOptions,
) -> Result<FdReport> {
    let tmax = t_list.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let def = Deformation::new(u.clone(), h.to_vec(), tmax * (1.0 + 1e-12))?;
    let s0 = generalized_spectrum(m, u, 3, opts)?;
    let pair = one_sided_from_spectrum(&s0, u, h)?;
    let l0 = s0.lambda2();
    let floor = 1e-11 * l0.abs().max(1.0);
    let mut samples = Vec::new();
    let (mut ts_r, mut dv_r, mut ts_l, mut dv_l) = (vec![], vec![], vec![], vec![]);
    for &t in t_list {
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("t values must be positive, got {t}")));
        }
        for (tt, formula) in [(t, pair.right), (-t, pair.left)] {
            let lt = generalized_spectrum(m, &def.deform(tt)?, 3, opts)?.lambda2();
            let slope = (lt - l0) / tt;
            let deviation = (slope - formula).abs();
            samples.push(FdSample { t: tt, slope, formula, deviation });
            let (ts, dv) = if tt > 0.0 { (&mut ts_r, &mut dv_r) } else { (&mut ts_l, &mut dv_l) };
            if deviation * t > floor {
                ts.push(t);
                dv.push(deviation);
            }
        }
    }
    let order = match (loglog_slope(&ts_r, &dv_r), loglog_slope(&ts_l, &dv_l)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(FdReport {
        right: pair.right,
        left: pair.left,
        max_deviation: samples.iter().map(|s| s.deviation).fold(0.0, f64::max),
        constant: samples.iter().map(|s| s.deviation / s.t.abs()).fold(0.0, f64::max),
        samples,
        order,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichSample {
    pub t: f64,
    pub lower: f64,
    pub lambda1: f64,
    pub upper: f64,
    pub holds: bool,
    pub strict: bool,
    pub lambda2_change: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub samples: Vec<SandwichSample>,
    pub all_hold: bool,
    pub first_violation: Option<f64>,
    /// max |lambda_2(u_t) - lambda_2(u)| / |t|
    pub lambda2_constant: f64,
}

/// Checks (1-|t||h|)^-(N-2) l1(u) <= l1(u_t) <= (1+|t||h|)^-(N-2) l1(u)
/// for every t and -t in the list, and tracks |l2(u_t) - l2(u)|.
pub fn continuity_sandwich_check(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    h: &[f64],
    t_list: &[f64],
    opts: &SolverOptions,
) -> Result<SandwichReport> {
    let tmax = t_list.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let def = Deformation::new(u.clone(), h.to_vec(), tmax * (1.0 + 1e-12))?;
    let s0 = generalized_spectrum(m, u, 2, opts)?;
    let l1 = s0.lambda1();
    if !(l1 < 0.0) {
        return Err(Error::InvalidInput(format!("sandwich bound needs lambda_1 < 0, got {l1}")));
    }
    let q = u.weight_exponent();
    let hn = sup_norm(h);
    let slack = 1e-12 * l1.abs();
    let mut samples = Vec::new();
    for &t in t_list {
        for tt in [t, -t] {
            let st = generalized_spectrum(m, &def.deform(tt)?, 2, opts)?;
            let x = tt.abs() * hn;
            let lower = (1.0 - x).powf(-q) * l1;
            let upper = (1.0 + x).powf(-q) * l1;
            let v = st.lambda1();
            samples.push(SandwichSample {
                t: tt,
                lower,
                lambda1: v,
                upper,
                holds: lower - slack <= v && v <= upper + slack,
                strict: lower < v && v < upper,
                lambda2_change: (st.lambda2() - s0.lambda2()).abs(),
            });
        }
    }
    let first_violation = samples.iter().find(|s| !s.holds).map(|s| s.t);
    Ok(SandwichReport {
        all_hold: first_violation.is_none(),
        first_violation,
        lambda2_constant: samples
            .iter()
            .filter(|s| s.t != 0.0)
            .map(|s| s.lambda2_change / s.t.abs())
            .fold(0.0, f64::max),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product() -> DiscreteManifold {
        let a = DiscreteManifold::build_circle(1.0, 20).unwrap();
        let b = DiscreteManifold::build_circle(0.5, 10).unwrap().with_dim(3);
        DiscreteManifold::product(&a, &b).with_constant_potential(-2.0).unwrap()
    }

    #[test]
    fn deform_basics() {
        let m = product();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let d = Deformation::new(u.clone(), vec![2.0; 200], 0.25).unwrap();
        assert_eq!(d.deform(0.0).unwrap(), u);
        assert!(d.deform(0.1).unwrap().values().iter().all(|v| (v - 1.2).abs() < 1e-15));
        assert!(matches!(d.deform(0.3), Err(Error::OutOfRange { .. })));
        assert!(Deformation::new(u, vec![2.0; 200], 0.5).is_err());
    }

    #[test]
    fn l_h_for_constant_h() {
        let m = product();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let s = generalized_spectrum(&m, &u, 3, &SolverOptions::default()).unwrap();
        let phi = &s.eigenvectors[1];
        let v = l_h_value(&m, &u, phi, &vec![0.7; 200]).unwrap();
        assert!((v - (-2.0 * s.lambda2() * 0.7)).abs() < 1e-12);
        assert_eq!(l_h_value(&m, &u, phi, &vec![0.0; 200]).unwrap(), 0.0);
        assert!(l_h_value(&m, &u, &vec![0.0; 200], &vec![1.0; 200]).is_err());
    }

    #[test]
    fn derivative_of_constant_h_is_scaling() {
        let m = product();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let p = one_sided_derivatives(&m, &u, &vec![0.5; 200], &SolverOptions::default()).unwrap();
        let l2 = generalized_spectrum(&m, &u, 3, &SolverOptions::default()).unwrap().lambda2();
        assert!((p.right - p.left).abs() < 1e-12);
        assert!((p.right + 2.0 * l2 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_recovers_power() {
        let x = [1.0, 2.0, 4.0];
        let y = [3.0, 12.0, 48.0];
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
