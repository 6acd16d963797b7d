use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::DiscreteManifold;
use crate::speclib::{generalized_spectrum, ConformalFactor, SolverOptions};

/// lambda_2 (sum w u^N)^((N-2)/N)
pub fn f2_value(m: &DiscreteManifold, u: &ConformalFactor, lambda2: f64) -> f64 {
    let n = u.critical_exponent();
    lambda2 * u.conformal_volume(m).powf((n - 2.0) / n)
}

/// sum w u^(-eps) (sum w u^N)^(eps/N); zero nodes are rejected.
pub fn penalty(m: &DiscreteManifold, u: &ConformalFactor, eps: f64) -> Result<f64> {
    if let Some(i) = u.values().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotInDomain { node: i, value: u.values()[i] });
    }
    let n = u.critical_exponent();
    let int_neg = m.integrate(u.values().iter().map(|v| v.powf(-eps)));
    Ok(int_neg * u.conformal_volume(m).powf(eps / n))
}

pub fn f2eps_value(m: &DiscreteManifold, u: &ConformalFactor, eps: f64, lambda2: f64) -> Result<f64> {
    Ok(f2_value(m, u, lambda2) - penalty(m, u, eps)?)
}

pub fn f2(m: &DiscreteManifold, u: &ConformalFactor, opts: &SolverOptions) -> Result<f64> {
    let s = generalized_spectrum(m, u, 2, opts)?;
    Ok(f2_value(m, u, s.lambda2()))
}

pub fn f2eps(m: &DiscreteManifold, u: &ConformalFactor, eps: f64, opts: &SolverOptions) -> Result<f64> {
    penalty(m, u, eps)?;
    let s = generalized_spectrum(m, u, 2, opts)?;
    f2eps_value(m, u, eps, s.lambda2())
}

/// Multipliers of the regularized Euler equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    pub epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta: f64,
}

impl RegParams {
    /// gamma2 = eps / ((N-2)|lambda_2|), gamma1 = 1 + gamma2 * int u^-eps.
    /// At eps = 0 this is the limit (1, 0).
    pub fn compute(m: &DiscreteManifold, u: &ConformalFactor, eps: f64, lambda2: f64) -> Result<Self> {
        if !(lambda2 < 0.0) {
            return Err(Error::InvalidInput(format!("regularized multipliers need lambda_2 < 0, got {lambda2}")));
        }
        let n = u.critical_exponent();
        if eps == 0.0 {
            return Ok(Self { epsilon: 0.0, gamma1: 1.0, gamma2: 0.0, beta: 2.0 / n });
        }
        let gamma2 = eps / ((n - 2.0) * lambda2.abs());
        let int_neg = m.integrate(u.values().iter().map(|v| v.powf(-eps)));
        Ok(Self { epsilon: eps, gamma1: 1.0 + gamma2 * int_neg, gamma2, beta: 2.0 / (eps + n) })
    }
}

/// Nodewise max(u, delta).
pub fn floor_truncate(u: &ConformalFactor, delta: f64) -> Result<ConformalFactor> {
    u.floor_truncate(delta)
}
