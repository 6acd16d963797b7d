use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instances::{random_factor, trial_rng, ProductExample};
use crate::error::Result;
use crate::optimizer::f2;
use crate::speclib::SolverOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalitySettings {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Log-uniform amplitude range of log u.
    pub amplitude: (f64, f64),
    /// How many of the closest samples must be nearly constant.
    pub nearest: usize,
    pub cv_bound: f64,
}

impl Default for MaximalitySettings {
    fn default() -> Self {
        Self { trials: 200, seed: 0, tol: 1e-8, amplitude: (1e-4, 0.5), nearest: 5, cv_bound: 1e-2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalitySample {
    pub trial: usize,
    pub f2: f64,
    /// F2(1) - F2(u)
    pub gap: f64,
    /// Coefficient of variation of u under the volume measure.
    pub cv: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub excess: f64,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalityReport {
    pub settings: MaximalitySettings,
    pub f2_constant: f64,
    /// |F2(c) - F2(1)| / |F2(1)| for a non-unit constant c.
    pub constant_deviation: f64,
    pub samples: Vec<MaximalitySample>,
    pub violations: Vec<Violation>,
    pub nearest: Vec<MaximalitySample>,
    pub pass: bool,
}

/// Samples random smooth factors and compares F2 against the constant factor.
pub fn maximality_sample_test(ex: &ProductExample, settings: &MaximalitySettings, solver: &SolverOptions) -> Result<MaximalityReport> {
    let m = &ex.manifold;
    let one = ex.unit_factor();
    let f2_constant = f2(m, &one, solver)?;
    let constant_deviation = ((f2(m, &one.scaled(2.5), solver)? - f2_constant) / f2_constant).abs();
    let (lo, hi) = settings.amplitude;
    let results: Vec<Result<(MaximalitySample, Vec<f64>)>> = (0..settings.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(settings.seed, trial as u64);
            let u = random_factor(m, &ex.angles, &mut rng, lo, hi)?;
            let value = f2(m, &u, solver)?;
            let w = m.weights();
            let mean: f64 = m.integrate(u.values().iter().copied());
            let var: f64 = u.values().iter().zip(w).map(|(x, w)| w * (x - mean).powi(2)).sum();
            let sample = MaximalitySample { trial, f2: value, gap: f2_constant - value, cv: var.sqrt() / mean };
            Ok((sample, u.values().to_vec()))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for r in results {
        let (s, u) = r?;
        if s.f2 > f2_constant + settings.tol {
            violations.push(Violation { trial: s.trial, excess: s.f2 - f2_constant, u });
        }
        samples.push(s);
    }
    let mut nearest = samples.clone();
    nearest.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.trial.cmp(&b.trial)));
    nearest.truncate(settings.nearest);
    let pass = violations.is_empty()
        && nearest.iter().all(|s| s.cv < settings.cv_bound)
        && constant_deviation <= settings.tol;
    Ok(MaximalityReport { settings: settings.clone(), f2_constant, constant_deviation, samples, violations, nearest, pass })
}
