use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::analytic::{circle_spectrum_discrete, product_spectrum_analytic, ProductSpec};
use crate::error::Result;
use crate::manifold::DiscreteManifold;
use crate::speclib::ConformalFactor;

/// S^1(1) x C(1/2) with constant potential. The second circle carries
/// nominal dimension 3, so the product has dimension 4.
#[derive(Clone, Debug)]
pub struct ProductExample {
    pub manifold: DiscreteManifold,
    /// (S^1 angle, second-factor angle) per node.
    pub angles: Vec<[f64; 2]>,
    pub circle_nodes: usize,
    pub h_nodes: usize,
    pub potential: f64,
}

impl ProductExample {
    pub const CIRCLE_RADIUS: f64 = 1.0;
    pub const H_RADIUS: f64 = 0.5;
    pub const H_DIM: usize = 3;
    pub const POTENTIAL: f64 = -2.0;

    pub fn new(circle_nodes: usize, h_nodes: usize) -> Result<Self> {
        Self::with_potential(circle_nodes, h_nodes, Self::POTENTIAL)
    }

    pub fn with_potential(circle_nodes: usize, h_nodes: usize, potential: f64) -> Result<Self> {
        let a = DiscreteManifold::build_circle(Self::CIRCLE_RADIUS, circle_nodes)?;
        let b = DiscreteManifold::build_circle(Self::H_RADIUS, h_nodes)?.with_dim(Self::H_DIM);
        let manifold = DiscreteManifold::product(&a, &b).with_constant_potential(potential)?;
        let angles = (0..circle_nodes * h_nodes)
            .map(|i| [TAU * (i / h_nodes) as f64 / circle_nodes as f64, TAU * (i % h_nodes) as f64 / h_nodes as f64])
            .collect();
        Ok(Self { manifold, angles, circle_nodes, h_nodes, potential })
    }

    /// cos or sin of the S^1 angle at every node.
    pub fn circle_mode(&self, sine: bool) -> Vec<f64> {
        self.angles.iter().map(|a| if sine { a[0].sin() } else { a[0].cos() }).collect()
    }

    pub fn unit_factor(&self) -> ConformalFactor {
        ConformalFactor::constant(&self.manifold, 1.0).expect("dimension 4")
    }

    /// Exact spectrum of the discrete product at u = 1.
    pub fn analytic(&self) -> ProductSpec {
        product_spectrum_analytic(
            &circle_spectrum_discrete(Self::CIRCLE_RADIUS, self.circle_nodes),
            &circle_spectrum_discrete(Self::H_RADIUS, self.h_nodes),
            self.potential,
        )
    }
}

/// Circle with a sign-definite potential s * q(theta), s placed midway in the
/// window where exactly two eigenvalues are negative.
#[derive(Clone, Debug)]
pub struct NodalInstance {
    pub manifold: DiscreteManifold,
    pub angles: Vec<[f64; 2]>,
    pub scale: f64,
    /// Scales at which the second and third eigenvalues cross zero.
    pub window: (f64, f64),
}

pub const NODAL_DIM: usize = 4;

fn nodal_shape(t: f64) -> f64 {
    -1.0 + 0.6 * t.cos() + 0.3 * (2.0 * t + 0.7).sin()
}

/// Since q < 0, lambda_j(s) decreases in s and crosses zero at the j-th
/// eigenvalue of the pencil (K, diag(-w q)).
pub fn nodal_instance(nodes: usize) -> Result<NodalInstance> {
    let base = DiscreteManifold::build_circle(1.0, nodes)?.with_dim(NODAL_DIM);
    let t: Vec<f64> = (0..nodes).map(|i| TAU * i as f64 / nodes as f64).collect();
    let q: Vec<f64> = t.iter().map(|&x| nodal_shape(x)).collect();
    let w = base.weights();
    let scale: Vec<f64> = w.iter().zip(&q).map(|(w, q)| 1.0 / (-w * q).sqrt()).collect();
    let mut b = DMatrix::zeros(nodes, nodes);
    for (i, j, v) in base.stiffness().triplets() {
        b[(i, j)] = v * scale[i] * scale[j];
    }
    let mut s: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    let window = (s[1], s[2]);
    let mid = 0.5 * (window.0 + window.1);
    let p: Vec<f64> = q.iter().map(|q| mid * q).collect();
    Ok(NodalInstance {
        manifold: base.with_potential(&p)?,
        angles: t.iter().map(|&x| [x, 0.0]).collect(),
        scale: mid,
        window,
    })
}

/// Independent stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Log-uniform on [lo, hi].
pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// exp(amplitude * g) with g a random trigonometric polynomial of degree
/// two in each angle, scaled to sup |g| = 1.
pub fn smooth_field(angles: &[[f64; 2]], rng: &mut impl Rng, amplitude: f64) -> Vec<f64> {
    let mut modes = Vec::new();
    for ka in 0..=2i32 {
        for kb in -2..=2i32 {
            if ka == 0 && kb <= 0 {
                continue;
            }
            modes.push((ka as f64, kb as f64, rng.random_range(-1.0..=1.0), rng.random_range(0.0..TAU)));
        }
    }
    let g: Vec<f64> = angles
        .iter()
        .map(|a| modes.iter().map(|(ka, kb, c, ph)| c * (ka * a[0] + kb * a[1] + ph).cos()).sum())
        .collect();
    let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    g.iter().map(|v| (amplitude * v / sup).exp()).collect()
}

/// Smooth field with log-uniform amplitude in [lo, hi], normalized to unit
/// conformal volume.
pub fn random_factor(m: &DiscreteManifold, angles: &[[f64; 2]], rng: &mut impl Rng, lo: f64, hi: f64) -> Result<ConformalFactor> {
    let amp = log_uniform(rng, lo, hi);
    Ok(ConformalFactor::new(m, smooth_field(angles, rng, amp))?.normalized(m))
}
