use serde::{Deserialize, Serialize};

/// Spectrum of K_a (x) W_b + W_a (x) K_b + V from the factor spectra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub factor_spectra: [Vec<f64>; 2],
    pub shift: f64,
    pub merged: Vec<f64>,
}

impl ProductSpec {
    /// Multiplicity of merged[i] within a relative tolerance.
    pub fn multiplicity(&self, i: usize, tol: f64) -> usize {
        let x = self.merged[i];
        self.merged.iter().filter(|y| (*y - x).abs() <= tol * x.abs().max(1.0)).count()
    }
}

/// Both inputs list eigenvalues with repetition. All pairwise sums are formed.
pub fn product_spectrum_analytic(a: &[f64], b: &[f64], shift: f64) -> ProductSpec {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = sa.iter().flat_map(|x| sb.iter().map(move |y| x + y + shift)).collect();
    merged.sort_by(f64::total_cmp);
    ProductSpec { factor_spectra: [sa, sb], shift, merged }
}

/// Eigenvalues of the lumped circle of `nodes` points: (2 - 2 cos(2 pi j / n)) / h^2.
pub fn circle_spectrum_discrete(radius: f64, nodes: usize) -> Vec<f64> {
    let h = std::f64::consts::TAU * radius / nodes as f64;
    let mut v: Vec<f64> = (0..nodes)
        .map(|j| (2.0 - 2.0 * (std::f64::consts::TAU * j as f64 / nodes as f64).cos()) / (h * h))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// The lowest `count` eigenvalues j^2 / r^2 of the round circle, with multiplicity.
pub fn circle_spectrum_continuum(radius: f64, count: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut j = 1.0;
    while v.len() < count {
        v.push(j * j / (radius * radius));
        v.push(j * j / (radius * radius));
        j += 1.0;
    }
    v.truncate(count);
    v
}
