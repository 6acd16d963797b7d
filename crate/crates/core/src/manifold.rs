//! Discrete closed manifolds: lumped quadrature weights, a symmetric stiffness
//! matrix (weak form of the Laplacian), and a nodal potential.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

#[derive(Clone, Debug)]
pub struct DiscreteManifold {
    dim: usize,
    weights: Vec<f64>,
    stiffness: CsrMatrix,
    potential: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

fn adjacency_of(stiffness: &CsrMatrix) -> Vec<Vec<usize>> {
    (0..stiffness.nrows())
        .map(|i| stiffness.row(i).filter(|&(j, _)| j != i).map(|(j, _)| j).collect())
        .collect()
}

impl DiscreteManifold {
    /// Assembles a manifold from raw parts and normalizes it to unit volume.
    pub fn from_parts(dim: usize, weights: Vec<f64>, stiffness: CsrMatrix, potential: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidInput("manifold has no nodes".into()));
        }
        if stiffness.nrows() != n || potential.len() != n {
            return Err(Error::InvalidInput(format!(
                "size mismatch: {n} weights, {}x{0} stiffness, {} potential values",
                stiffness.nrows(),
                potential.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput(format!("weight {i} is not positive: {}", weights[i])));
        }
        if potential.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("potential must be finite".into()));
        }
        let scale = stiffness.max_abs().max(f64::MIN_POSITIVE);
        if stiffness.max_asymmetry() > 1e-12 * scale {
            return Err(Error::InvalidInput("stiffness is not symmetric".into()));
        }
        let row_sum = stiffness.matvec(&vec![1.0; n]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if row_sum > 1e-10 * scale {
            return Err(Error::InvalidInput(format!(
                "stiffness does not annihilate constants (max row sum {row_sum:e})"
            )));
        }
        let adjacency = adjacency_of(&stiffness);
        Ok(Self { dim, weights, stiffness, potential, adjacency }.normalize_volume())
    }

    /// Uniform periodic grid on a circle of the given radius, second-order
    /// centered differences. The nominal dimension is 1; see [`Self::with_dim`].
    pub fn build_circle(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        if nodes < 8 {
            return Err(Error::InvalidInput(format!("circle needs at least 8 nodes, got {nodes}")));
        }
        let h = 2.0 * PI * radius / nodes as f64;
        let mut t = Vec::with_capacity(3 * nodes);
        for i in 0..nodes {
            let next = (i + 1) % nodes;
            t.push((i, i, 2.0 / h));
            t.push((i, next, -1.0 / h));
            t.push((next, i, -1.0 / h));
        }
        let stiffness = CsrMatrix::from_triplets(nodes, &t);
        Self::from_parts(1, vec![h; nodes], stiffness, vec![0.0; nodes])
    }

    /// Tensor-sum product. Node (i, k) of the result has index i * b.node_count() + k.
    pub fn product(a: &Self, b: &Self) -> Self {
        let wa = CsrMatrix::diagonal_matrix(&a.weights);
        let wb = CsrMatrix::diagonal_matrix(&b.weights);
        let stiffness = CsrMatrix::kron(&a.stiffness, &wb).add(&CsrMatrix::kron(&wa, &b.stiffness));
        let nb = b.node_count();
        let mut weights = Vec::with_capacity(a.node_count() * nb);
        let mut potential = Vec::with_capacity(a.node_count() * nb);
        for i in 0..a.node_count() {
            for k in 0..nb {
                weights.push(a.weights[i] * b.weights[k]);
                potential.push(a.potential[i] + b.potential[k]);
            }
        }
        let adjacency = adjacency_of(&stiffness);
        Self { dim: a.dim + b.dim, weights, stiffness, potential, adjacency }.normalize_volume()
    }

    /// Sets the nominal manifold dimension used for the conformal exponents.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_potential(mut self, v: &[f64]) -> Result<Self> {
        if v.len() != self.node_count() {
            return Err(Error::InvalidInput(format!(
                "potential has {} values for {} nodes",
                v.len(),
                self.node_count()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("potential must be finite".into()));
        }
        self.potential = v.to_vec();
        Ok(self)
    }

    pub fn with_constant_potential(self, v: f64) -> Result<Self> {
        let n = self.node_count();
        self.with_potential(&vec![v; n])
    }

    /// Rescales weights to unit total and the stiffness by the same factor,
    /// which leaves every Rayleigh quotient unchanged.
    pub fn normalize_volume(mut self) -> Self {
        let vol: f64 = self.weights.iter().sum();
        if vol != 1.0 {
            self.weights.iter_mut().for_each(|w| *w /= vol);
            self.stiffness = self.stiffness.scaled(1.0 / vol);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// K = stiffness + diag(weights * potential).
    pub fn operator(&self) -> CsrMatrix {
        let d: Vec<f64> = self.weights.iter().zip(&self.potential).map(|(w, p)| w * p).collect();
        self.stiffness.add_diagonal(&d)
    }

    /// Edges (i < j) with their effective lengths sqrt(w / |k_ij|).
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.node_count() {
            for (j, k) in self.stiffness.row(i) {
                if j > i && k != 0.0 {
                    let w = 0.5 * (self.weights[i] + self.weights[j]);
                    out.push((i, j, (w / k.abs()).sqrt()));
                }
            }
        }
        out
    }

    /// Largest edge difference quotient of a nodal field.
    pub fn lipschitz_proxy(&self, u: &[f64]) -> f64 {
        self.edges().iter().map(|&(i, j, len)| (u[i] - u[j]).abs() / len).fold(0.0, f64::max)
    }

    /// Weighted integral sum_i w_i f_i.
    pub fn integrate(&self, f: impl IntoIterator<Item = f64>) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn from_mesh_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::MeshParse { line: 1, msg: "empty mesh file".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(Error::MeshParse { line: hline, msg: "expected header `dim n_nodes n_entries`".into() });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|_| Error::MeshParse { line, msg: format!("expected integer, got `{s}`") })
        };
        let parse_f64 = |s: &str, line: usize| {
            s.parse::<f64>().map_err(|_| Error::MeshParse { line, msg: format!("expected number, got `{s}`") })
        };
        let dim = parse_usize(h[0], hline)?;
        let n = parse_usize(h[1], hline)?;
        let n_entries = parse_usize(h[2], hline)?;
        let mut weights = vec![f64::NAN; n];
        let mut potential = vec![0.0; n];
        let mut triplets = Vec::new();
        let mut entries = 0;
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let node = |s: &str| -> Result<usize> {
                let i = parse_usize(s, line)?;
                if i >= n {
                    return Err(Error::MeshParse { line, msg: format!("node index {i} out of range 0..{n}") });
                }
                Ok(i)
            };
            match (f[0], f.len()) {
                ("w", 3) => weights[node(f[1])?] = parse_f64(f[2], line)?,
                ("p", 3) => potential[node(f[1])?] = parse_f64(f[2], line)?,
                ("k", 4) => {
                    let (i, j) = (node(f[1])?, node(f[2])?);
                    if i > j {
                        return Err(Error::MeshParse { line, msg: "stiffness entries must be upper triangle (i <= j)".into() });
                    }
                    let v = parse_f64(f[3], line)?;
                    triplets.push((i, j, v));
                    if i != j {
                        triplets.push((j, i, v));
                    }
                    entries += 1;
                }
                _ => return Err(Error::MeshParse { line, msg: format!("unrecognized record `{l}`") }),
            }
        }
        if entries != n_entries {
            return Err(Error::MeshParse {
                line: hline,
                msg: format!("header announces {n_entries} stiffness entries, found {entries}"),
            });
        }
        if let Some(i) = weights.iter().position(|w| w.is_nan()) {
            return Err(Error::MeshParse { line: hline, msg: format!("node {i} has no weight") });
        }
        Self::from_parts(dim, weights, CsrMatrix::from_triplets(n, &triplets), potential)
    }

    pub fn read_mesh(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_mesh_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_mesh_string(&self) -> String {
        let upper: Vec<_> = self.stiffness.triplets().filter(|&(i, j, _)| i <= j).collect();
        let mut s = format!("{} {} {}\n", self.dim, self.node_count(), upper.len());
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(s, "w {i} {w:e}").unwrap();
        }
        for (i, p) in self.potential.iter().enumerate() {
            if *p != 0.0 {
                writeln!(s, "p {i} {p:e}").unwrap();
            }
        }
        for (i, j, v) in upper {
            writeln!(s, "k {i} {j} {v:e}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_normalized_and_annihilates_constants() {
        let c = DiscreteManifold::build_circle(2.0, 16).unwrap();
        assert!((c.volume() - 1.0).abs() < 1e-14);
        let k1 = c.stiffness().matvec(&[1.0; 16]);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(c.adjacency()[0], vec![1, 15]);
    }

    #[test]
    fn rejects_bad_circles() {
        assert!(DiscreteManifold::build_circle(1.0, 7).is_err());
        assert!(DiscreteManifold::build_circle(0.0, 16).is_err());
        assert!(DiscreteManifold::build_circle(-1.0, 16).is_err());
    }

    #[test]
    fn normalize_halves_weights() {
        let k = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)]);
        let m = DiscreteManifold {
            dim: 3,
            weights: vec![1.0, 1.0],
            stiffness: k.clone(),
            potential: vec![0.0; 2],
            adjacency: adjacency_of(&k),
        }
        .normalize_volume();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_eq!(m.stiffness().get(0, 1), -0.5);
        let again = m.clone().normalize_volume();
        assert_eq!(again.weights(), m.weights());
    }

    #[test]
    fn edge_length_is_grid_spacing() {
        let c = DiscreteManifold::build_circle(1.0, 32).unwrap();
        let h = 2.0 * PI / 32.0;
        for (_, _, len) in c.edges() {
            assert!((len - h).abs() < 1e-12);
        }
        let p = DiscreteManifold::product(&c, &DiscreteManifold::build_circle(0.5, 16).unwrap());
        let lens: Vec<f64> = p.edges().iter().map(|e| e.2).collect();
        assert!(lens.iter().any(|l| (l - h).abs() < 1e-12));
        assert!(lens.iter().any(|l| (l - PI / 16.0).abs() < 1e-12));
    }

    #[test]
    fn mesh_round_trip() {
        let c = DiscreteManifold::build_circle(1.0, 10).unwrap().with_dim(3).with_constant_potential(-0.5).unwrap();
        let text = c.to_mesh_string();
        let back = DiscreteManifold::from_mesh_str(&text).unwrap();
        assert_eq!(back.dim(), 3);
        for (a, b) in back.weights().iter().zip(c.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((back.stiffness().get(0, 1) - c.stiffness().get(0, 1)).abs() < 1e-13);
        assert_eq!(back.potential()[3], -0.5);
    }

    #[test]
    fn mesh_errors_carry_line_numbers() {
        let bad = "3 2 1\nw 0 0.5\nw 1 0.5\n# comment\nk 0 x 1.0\n";
        match DiscreteManifold::from_mesh_str(bad) {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        let lower = "3 2 1\nw 0 0.5\nw 1 0.5\nk 1 0 -1.0\n";
        assert!(matches!(DiscreteManifold::from_mesh_str(lower), Err(Error::MeshParse { line: 4, .. })));
    }

    #[test]
    fn mesh_rejects_non_laplacian() {
        let text = "3 2 1\nw 0 0.5\nw 1 0.5\nk 0 0 1.0\n";
        assert!(matches!(DiscreteManifold::from_mesh_str(text), Err(Error::InvalidInput(_))));
    }
}
