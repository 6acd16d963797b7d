use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::manifold::DiscreteManifold;
use crate::speclib::{weighted_mass, ConformalFactor};

pub const REFERENCE_LIMIT: usize = 1500;

#[derive(Clone, Debug)]
pub struct ReferenceSpectrum {
    pub eigenvalues: Vec<f64>,
    /// M_u-orthonormal, zero off the support.
    pub eigenvectors: Vec<Vec<f64>>,
    pub support: Vec<bool>,
}

/// All eigenpairs of the support-restricted pencil from a dense symmetric
/// eigensolve of M^-1/2 K M^-1/2.
pub fn dense_reference_solve(m: &DiscreteManifold, u: &ConformalFactor) -> Result<ReferenceSpectrum> {
    let mass = weighted_mass(m, u)?;
    let idx = mass.support_indices();
    let s = idx.len();
    if s > REFERENCE_LIMIT {
        return Err(Error::TooLarge { nodes: s, limit: REFERENCE_LIMIT });
    }
    let mut pos = vec![usize::MAX; m.node_count()];
    idx.iter().enumerate().for_each(|(p, &i)| pos[i] = p);
    let scale: Vec<f64> = idx.iter().map(|&i| 1.0 / mass.diag[i].sqrt()).collect();
    let mut b = DMatrix::zeros(s, s);
    for (i, j, v) in m.operator().triplets() {
        let (p, q) = (pos[i], pos[j]);
        if p != usize::MAX && q != usize::MAX {
            b[(p, q)] = v * scale[p] * scale[q];
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let mut full = vec![0.0; m.node_count()];
            for (p, &i) in idx.iter().enumerate() {
                full[i] = eig.eigenvectors[(p, k)] * scale[p];
            }
            full
        })
        .collect();
    Ok(ReferenceSpectrum { eigenvalues, eigenvectors, support: mass.support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;

    #[test]
    fn two_node_pencil() {
        // K = [[1,-1],[-1,1]] + I with unit weights: eigenvalues 1 and 3
        let k = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
        let m = DiscreteManifold::from_parts(3, vec![1.0, 1.0], k, vec![1.0, 1.0]).unwrap();
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        let r = dense_reference_solve(&m, &u).unwrap();
        // volume normalization divides K and w by 2, leaving the pencil unchanged
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn size_limit() {
        let m = DiscreteManifold::build_circle(1.0, 1600).unwrap().with_dim(3);
        let u = ConformalFactor::constant(&m, 1.0).unwrap();
        assert!(matches!(dense_reference_solve(&m, &u), Err(Error::TooLarge { .. })));
    }
}
