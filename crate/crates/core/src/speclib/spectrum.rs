use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::factor::ConformalFactor;
use crate::error::{Error, Result};
use crate::linalg::pencil::{dense_pencil, iterative_pencil, pencil_residual, IterativeOptions, PencilEigen};
use crate::linalg::CsrMatrix;
use crate::manifold::DiscreteManifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadSet {
    ZeroFill,
    HarmonicExtension,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dense,
    ShiftInvert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub solver_tol: f64,
    /// Relative to |lambda_2|.
    pub cluster_tol: f64,
    pub null_tol: f64,
    pub dense_limit: usize,
    pub force_iterative: bool,
    pub max_iter: usize,
    pub dead_set: DeadSet,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            solver_tol: 1e-8,
            cluster_tol: 1e-6,
            null_tol: 1e-6,
            dense_limit: 2000,
            force_iterative: false,
            max_iter: 3000,
            dead_set: DeadSet::ZeroFill,
            seed: 0x5eed,
        }
    }
}

/// Diagonal of M_u and the nodes kept after deflation.
#[derive(Clone, Debug)]
pub struct WeightedMass {
    pub diag: Vec<f64>,
    pub support: Vec<bool>,
}

impl WeightedMass {
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.support.len()).filter(|&i| self.support[i]).collect()
    }
}

pub fn weighted_mass(m: &DiscreteManifold, u: &ConformalFactor) -> Result<WeightedMass> {
    if u.len() != m.node_count() {
        return Err(Error::InvalidInput("factor does not match the manifold".into()));
    }
    let q = u.weight_exponent();
    let diag: Vec<f64> = m.weights().iter().zip(u.values()).map(|(w, v)| w * v.powf(q)).collect();
    if diag.iter().all(|d| *d == 0.0) {
        return Err(Error::ZeroConformalFactor);
    }
    Ok(WeightedMass { support: u.support_mask(m), diag })
}

#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub eigenvalues: Vec<f64>,
    /// Full-length vectors, M_u-orthonormal, zero (or extended) off support.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Indices of the eigenvalues within cluster_tol of lambda_2.
    pub cluster2: Vec<usize>,
    pub nu: usize,
    pub support: Vec<bool>,
    pub mass: Vec<f64>,
    pub solver: SolverKind,
    pub iterations: usize,
    pub extension_singular: bool,
}

impl SpectrumSlice {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn cluster_vectors(&self) -> Vec<&[f64]> {
        self.cluster2.iter().map(|&j| self.eigenvectors[j].as_slice()).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn cluster_of(values: &[f64], cluster_tol: f64) -> Vec<usize> {
    if values.len() < 2 {
        return Vec::new();
    }
    let l2 = values[1];
    (1..values.len()).take_while(|&j| (values[j] - l2).abs() <= cluster_tol * l2.abs()).collect()
}

/// Number of lowest pairs needed: `count`, the lambda_2 cluster plus one
/// more, and the first nonnegative eigenvalue.
fn pairs_needed(values: &[f64], count: usize, cluster_tol: f64) -> usize {
    let mut need = count.max(2);
    match values.iter().position(|&v| v >= 0.0) {
        Some(j) => need = need.max(j + 1),
        None => need = need.max(values.len() + 4),
    }
    if let Some(&last) = cluster_of(values, cluster_tol).last() {
        need = need.max(last + 2);
    }
    need
}

/// Lower bound on the pencil spectrum from the potential term.
fn spectrum_floor(m: &DiscreteManifold, mass: &WeightedMass, idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| m.weights()[i] * m.potential()[i] / mass.diag[i])
        .fold(f64::INFINITY, f64::min)
        .min(0.0)
}

fn solve_restricted(
    k: &CsrMatrix,
    d: &[f64],
    lower: f64,
    deflate: Option<&[f64]>,
    count: usize,
    opts: &SolverOptions,
) -> Result<(PencilEigen, SolverKind)> {
    let how_many = |v: &[f64]| pairs_needed(v, count, opts.cluster_tol);
    if d.len() < opts.dense_limit && !opts.force_iterative {
        Ok((dense_pencil(k, d, lower, deflate, how_many)?, SolverKind::Dense))
    } else {
        let it = IterativeOptions { tol: opts.solver_tol, max_iter: opts.max_iter, seed: opts.seed };
        Ok((iterative_pencil(k, d, lower, deflate, count.max(4), how_many, &it)?, SolverKind::ShiftInvert))
    }
}

/// Extends support vectors by solving K_DD x_D = -K_DS x_S on the dead set.
/// Returns false (and leaves zeros) when the dead block is singular.
fn harmonic_extension(k: &CsrMatrix, support: &[bool], vectors: &mut [Vec<f64>]) -> bool {
    let dead: Vec<usize> = (0..support.len()).filter(|&i| !support[i]).collect();
    if dead.is_empty() {
        return true;
    }
    if dead.len() > 4000 {
        return false;
    }
    let mut pos = vec![usize::MAX; support.len()];
    dead.iter().enumerate().for_each(|(a, &i)| pos[i] = a);
    let mut kdd = DMatrix::zeros(dead.len(), dead.len());
    for (a, &i) in dead.iter().enumerate() {
        for (j, v) in k.row(i) {
            if pos[j] != usize::MAX {
                kdd[(a, pos[j])] = v;
            }
        }
    }
    let lu = kdd.clone().lu();
    let scale = kdd.amax().max(f64::MIN_POSITIVE);
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if pivot <= 1e-12 * scale {
        return false;
    }
    for x in vectors.iter_mut() {
        let rhs = DVector::from_iterator(
            dead.len(),
            dead.iter().map(|&i| -k.row(i).filter(|&(j, _)| support[j]).map(|(j, v)| v * x[j]).sum::<f64>()),
        );
        match lu.solve(&rhs) {
            Some(sol) => dead.iter().enumerate().for_each(|(a, &i)| x[i] = sol[a]),
            None => return false,
        }
    }
    true
}

/// The `count` lowest generalized eigenpairs of (K, M_u) on the support of u,
/// extended so that the lambda_2 cluster and the first nonnegative eigenvalue
/// are included.
pub fn generalized_spectrum(
    m: &DiscreteManifold,
    u: &ConformalFactor,
    count: usize,
    opts: &SolverOptions,
) -> Result<SpectrumSlice> {
    let mass = weighted_mass(m, u)?;
    let idx = mass.support_indices();
    let k = m.operator();
    let ks = k.principal(&idx);
    let ds: Vec<f64> = idx.iter().map(|&i| mass.diag[i]).collect();
    let lower = spectrum_floor(m, &mass, &idx);
    let (eig, solver) = solve_restricted(&ks, &ds, lower, None, count, opts)?;
    let n = m.node_count();
    let keep = eig.vectors.len();
    let eigenvalues = eig.values[..keep].to_vec();
    let residuals = eig.vectors.iter().zip(&eigenvalues).map(|(x, &l)| pencil_residual(&ks, &ds, l, x)).collect();
    let mut eigenvectors: Vec<Vec<f64>> = eig
        .vectors
        .iter()
        .map(|x| {
            let mut full = vec![0.0; n];
            idx.iter().zip(x).for_each(|(&i, &v)| full[i] = v);
            full
        })
        .collect();
    let extension_singular = match opts.dead_set {
        DeadSet::ZeroFill => false,
        DeadSet::HarmonicExtension => {
            let ok = harmonic_extension(&k, &mass.support, &mut eigenvectors);
            if !ok {
                for x in eigenvectors.iter_mut() {
                    (0..n).filter(|&i| !mass.support[i]).for_each(|i| x[i] = 0.0);
                }
            }
            !ok
        }
    };
    let nu = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    Ok(SpectrumSlice {
        cluster2: cluster_of(&eigenvalues, opts.cluster_tol),
        eigenvalues,
        eigenvectors,
        residuals,
        nu,
        support: mass.support,
        mass: mass.diag,
        solver,
        iterations: eig.iterations,
        extension_singular,
    })
}

/// Number of negative generalized eigenvalues for a strictly positive u.
pub fn negative_count(m: &DiscreteManifold, u: &ConformalFactor, opts: &SolverOptions) -> Result<usize> {
    if !u.is_strictly_positive() {
        return Err(Error::InvalidInput("negative_count needs a strictly positive factor".into()));
    }
    let s = generalized_spectrum(m, u, 2, opts)?;
    if let Some(&l) = s.eigenvalues.iter().find(|l| l.abs() <= opts.null_tol) {
        return Err(Error::KernelWarning { eigenvalue: l, null_tol: opts.null_tol });
    }
    Ok(s.nu)
}

/// lambda_2 as the minimum of the Rayleigh quotient over the M_u-orthogonal
/// complement of the first eigenvector.
pub fn lambda2_orthogonal(m: &DiscreteManifold, u: &ConformalFactor, opts: &SolverOptions) -> Result<f64> {
    let full = generalized_spectrum(m, u, 2, opts)?;
    let gap = full.lambda2() - full.lambda1();
    if gap <= opts.cluster_tol * full.lambda1().abs().max(full.lambda2().abs()) {
        return Err(Error::FirstNotSimple { gap });
    }
    let mass = weighted_mass(m, u)?;
    let idx = mass.support_indices();
    let ks = m.operator().principal(&idx);
    let ds: Vec<f64> = idx.iter().map(|&i| mass.diag[i]).collect();
    let phi1: Vec<f64> = idx.iter().map(|&i| full.eigenvectors[0][i]).collect();
    let lower = spectrum_floor(m, &mass, &idx);
    let (eig, _) = solve_restricted(&ks, &ds, lower, Some(&phi1), 1, opts)?;
    Ok(eig.values[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub constant_sign: bool,
    pub simple: bool,
    pub gap: f64,
}

/// Whether the ground state keeps one sign on the support and is simple.
pub fn first_eigen_sign(m: &DiscreteManifold, u: &ConformalFactor, opts: &SolverOptions) -> Result<SignReport> {
    let s = generalized_spectrum(m, u, 2, opts)?;
    let phi = &s.eigenvectors[0];
    let scale = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let on: Vec<f64> = (0..phi.len()).filter(|&i| s.support[i]).map(|i| phi[i]).collect();
    let pos = on.iter().any(|&v| v > 1e-10 * scale);
    let neg = on.iter().any(|&v| v < -1e-10 * scale);
    let gap = s.lambda2() - s.lambda1();
    Ok(SignReport {
        constant_sign: !(pos && neg),
        simple: gap > opts.cluster_tol * s.lambda2().abs().max(s.lambda1().abs()),
        gap,
    })
}
