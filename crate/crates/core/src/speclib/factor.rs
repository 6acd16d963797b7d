use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::DiscreteManifold;

/// Nodes whose mass w_i u_i^(N-2) falls below this fraction of the largest
/// mass are deflated.
pub const DEFLATION_THRESHOLD: f64 = 1e-14;

/// N = 2m / (m - 2).
pub fn critical_exponent(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::InvalidInput(format!(
            "conformal exponents need dimension >= 3, got {dim}; set a nominal dimension"
        )));
    }
    Ok(2.0 * dim as f64 / (dim as f64 - 2.0))
}

/// Nonnegative nodal conformal factor u, carrying the exponent N of its manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    values: Vec<f64>,
    exponent: f64,
}

impl ConformalFactor {
    pub fn new(m: &DiscreteManifold, values: Vec<f64>) -> Result<Self> {
        let exponent = critical_exponent(m.dim())?;
        if values.len() != m.node_count() {
            return Err(Error::InvalidInput(format!(
                "factor has {} values for {} nodes",
                values.len(),
                m.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("u[{i}] = {} is not a nonnegative number", values[i])));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroConformalFactor);
        }
        Ok(Self { values, exponent })
    }

    pub fn constant(m: &DiscreteManifold, c: f64) -> Result<Self> {
        Self::new(m, vec![c; m.node_count()])
    }

    /// Same exponent, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidInput("length mismatch".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("factor values must be finite and nonnegative".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroConformalFactor);
        }
        Ok(Self { values, exponent: self.exponent })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// N
    pub fn critical_exponent(&self) -> f64 {
        self.exponent
    }

    /// N - 2
    pub fn weight_exponent(&self) -> f64 {
        self.exponent - 2.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), exponent: self.exponent }
    }

    /// sum_i w_i u_i^N
    pub fn conformal_volume(&self, m: &DiscreteManifold) -> f64 {
        m.integrate(self.values.iter().map(|v| v.powf(self.exponent)))
    }

    /// Rescaled so that the conformal volume is 1.
    pub fn normalized(&self, m: &DiscreteManifold) -> Self {
        self.scaled(self.conformal_volume(m).powf(-1.0 / self.exponent))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Nodes that survive deflation of the mass w_i u_i^(N-2).
    pub fn support_mask(&self, m: &DiscreteManifold) -> Vec<bool> {
        let mass: Vec<f64> = m
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, u)| w * u.powf(self.weight_exponent()))
            .collect();
        let top = mass.iter().copied().fold(0.0, f64::max);
        mass.iter().map(|&x| x >= DEFLATION_THRESHOLD * top && x > 0.0).collect()
    }

    /// Nodewise max(u, delta).
    pub fn floor_truncate(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("truncation level must be positive, got {delta}")));
        }
        Ok(Self { values: self.values.iter().map(|v| v.max(delta)).collect(), exponent: self.exponent })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> DiscreteManifold {
        DiscreteManifold::build_circle(1.0, 16).unwrap().with_dim(4)
    }

    #[test]
    fn exponents() {
        assert_eq!(critical_exponent(4).unwrap(), 4.0);
        assert_eq!(critical_exponent(3).unwrap(), 6.0);
        assert!((critical_exponent(6).unwrap() - 3.0).abs() < 1e-15);
        assert!(critical_exponent(2).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        let m = circle();
        assert!(matches!(ConformalFactor::new(&m, vec![0.0; 16]), Err(Error::ZeroConformalFactor)));
        let mut v = vec![1.0; 16];
        v[3] = -0.1;
        assert!(ConformalFactor::new(&m, v).is_err());
        assert!(ConformalFactor::new(&m, vec![1.0; 15]).is_err());
        let low = DiscreteManifold::build_circle(1.0, 16).unwrap();
        assert!(ConformalFactor::constant(&low, 1.0).is_err());
    }

    #[test]
    fn normalization() {
        let m = circle();
        let u = ConformalFactor::new(&m, (0..16).map(|i| 1.0 + 0.1 * i as f64).collect()).unwrap();
        assert!((u.normalized(&m).conformal_volume(&m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn support_mask_excludes_zeros() {
        let m = circle();
        let v: Vec<f64> = (0..16).map(|i| if i < 8 { 0.0 } else { 1.0 }).collect();
        let u = ConformalFactor::new(&m, v).unwrap();
        let mask = u.support_mask(&m);
        assert_eq!(mask.iter().filter(|b| **b).count(), 8);
        assert!(mask[8..].iter().all(|b| *b));
    }

    #[test]
    fn floor_truncate_identity_below_min() {
        let m = circle();
        let u = ConformalFactor::constant(&m, 2.0).unwrap();
        assert_eq!(u.floor_truncate(1.0).unwrap(), u);
        assert!(u.floor_truncate(0.0).is_err());
    }
}
