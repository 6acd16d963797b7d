use faer::sparse::{SparseColMat, Triplet};

/// Square sparse matrix in compressed-row form with full (both triangles) storage.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed; explicit zeros are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of bounds for n = {n}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// x^T A x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Self::from_triplets(self.n, &t)
    }

    /// Kronecker product; index of (i, k) is i * b.n + k.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let nb = b.n;
        let mut t = Vec::with_capacity(a.nnz() * b.nnz());
        for (i, j, va) in a.triplets() {
            for (k, l, vb) in b.triplets() {
                t.push((i * nb + k, j * nb + l, va * vb));
            }
        }
        Self::from_triplets(a.n * nb, &t)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let t: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.n, &t)
    }

    /// Principal submatrix on the given (sorted) index list.
    pub fn principal(&self, idx: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            map[i] = k;
        }
        let mut t = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((k, map[j], v));
                }
            }
        }
        Self::from_triplets(idx.len(), &t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Lower triangle in faer's column-major sparse format.
    pub fn to_faer_lower(&self) -> SparseColMat<usize, f64> {
        let t: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("valid triplets")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (0, 1, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn kron_matches_dense() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let b = CsrMatrix::from_triplets(2, &[(0, 0, 5.0), (1, 1, 7.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let k = CsrMatrix::kron(&a, &b);
        let da = a.to_dense();
        let db = b.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        assert_eq!(k.get(i * 2 + p, j * 2 + q), da[i][j] * db[p][q]);
                    }
                }
            }
        }
    }

    #[test]
    fn principal_submatrix() {
        let m = CsrMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 4.0), (2, 0, 4.0)]);
        let p = m.principal(&[0, 2]);
        assert_eq!(p.to_dense(), vec![vec![1.0, 4.0], vec![4.0, 3.0]]);
    }
}
