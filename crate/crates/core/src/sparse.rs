//! Sparse symmetric matrices and an envelope (profile) Cholesky solver.
//!
//! Matrices keep both triangles in CSR form so that products are a single
//! pass. Factorizations reorder with reverse Cuthill-McKee first; for the 2D
//! meshes used here the resulting envelope is roughly `sqrt(n)` wide, which
//! keeps factor and solve costs well below a dense approach.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};

/// Symmetric matrix in compressed sparse row form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed. Each
    /// off-diagonal entry must be supplied for both `(i, j)` and `(j, i)`.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; dim + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..dim {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { dim, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let slice = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match slice.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other` for matrices on the same pattern or not.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(invalid("dimension mismatch in sparse addition"));
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        Ok(Self::from_triplets(self.dim, &t))
    }

    /// Principal submatrix on `keep` (indices into this matrix, in the order
    /// given).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (old_j, v) in self.row(old_i) {
                if map[old_j] != usize::MAX {
                    t.push((new_i, map[old_j], v));
                }
            }
        }
        Self::from_triplets(keep.len(), &t)
    }

    /// Largest |a_ij - a_ji| relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Reverse Cuthill-McKee permutation: `perm[new] = old`.
    pub fn rcm_ordering(&self) -> Vec<usize> {
        let n = self.dim;
        let degree: Vec<usize> = (0..n).map(|i| self.row_ptr[i + 1] - self.row_ptr[i]).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            // Start each component from a minimum-degree node, then move to a
            // pseudo-peripheral node via one BFS sweep.
            let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
            let start = self.farthest_from(seed, &visited, &degree);
            let mut queue = VecDeque::from([start]);
            visited[start] = true;
            while let Some(u) = queue.pop_front() {
                order.push(u);
                let mut nbrs: Vec<usize> =
                    self.row(u).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
                nbrs.sort_by_key(|&j| (degree[j], j));
                for j in nbrs {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order.reverse();
        order
    }

    fn farthest_from(&self, seed: usize, blocked: &[bool], degree: &[usize]) -> usize {
        let mut dist = vec![usize::MAX; self.dim];
        dist[seed] = 0;
        let mut queue = VecDeque::from([seed]);
        let mut best = seed;
        while let Some(u) = queue.pop_front() {
            if dist[u] > dist[best] || (dist[u] == dist[best] && degree[u] < degree[best]) {
                best = u;
            }
            for (j, _) in self.row(u) {
                if !blocked[j] && dist[j] == usize::MAX {
                    dist[j] = dist[u] + 1;
                    queue.push_back(j);
                }
            }
        }
        best
    }
}

/// Lower-triangular envelope storage in a permuted ordering.
#[derive(Debug, Clone)]
struct Envelope {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Envelope {
    fn from_matrix(a: &SparseSymmetricMatrix, perm: Vec<usize>) -> Self {
        let n = a.dim();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let new_j = inv[old_j];
                if new_j < first[new_i] {
                    first[new_i] = new_j;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let new_j = inv[old_j];
                if new_j <= new_i {
                    data[start[new_i] + new_j - first[new_i]] = v;
                }
            }
        }
        Self { perm, first, start, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.start[i]..self.start[i + 1]]
    }

    /// In-place LDL^T without pivoting; returns the diagonal `d` and leaves
    /// the unit lower factor (off-diagonal part) in `data`.
    fn factor_ldl(&mut self) -> Vec<f64> {
        let n = self.first.len();
        let mut d = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            // Row i entries for columns fi..i: l_ij = (a_ij - sum_k l_ik d_k l_jk) / d_j
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let mut s = self.data[self.start[i] + j - fi];
                let ri = self.start[i] + k0 - fi;
                let rj = self.start[j] + k0 - fj;
                for t in 0..(j - k0) {
                    s -= self.data[ri + t] * d[k0 + t] * self.data[rj + t];
                }
                self.data[self.start[i] + j - fi] = s / d[j];
            }
            let mut s = self.data[self.start[i] + i - fi];
            let ri = self.start[i];
            for t in 0..(i - fi) {
                let l = self.data[ri + t];
                s -= l * l * d[fi + t];
            }
            d[i] = s;
            self.data[self.start[i] + i - fi] = 1.0;
        }
        d
    }
}

/// Cholesky factor `P A P^T = L L^T` of a sparse SPD matrix in envelope form.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    env: Envelope,
}

impl SparseCholesky {
    pub fn new(a: &SparseSymmetricMatrix) -> Result<Self> {
        let perm = a.rcm_ordering();
        let mut env = Envelope::from_matrix(a, perm);
        let n = a.dim();
        for i in 0..n {
            let fi = env.first[i];
            for j in fi..i {
                let fj = env.first[j];
                let k0 = fi.max(fj);
                let ri = env.start[i] + k0 - fi;
                let rj = env.start[j] + k0 - fj;
                let len = j - k0;
                let dot: f64 =
                    env.data[ri..ri + len].iter().zip(&env.data[rj..rj + len]).map(|(x, y)| x * y).sum();
                let ljj = env.data[env.start[j] + j - fj];
                let idx = env.start[i] + j - fi;
                env.data[idx] = (env.data[idx] - dot) / ljj;
            }
            let ri = env.start[i];
            let len = i - fi;
            let sq: f64 = env.data[ri..ri + len].iter().map(|x| x * x).sum();
            let diag = env.data[ri + len] - sq;
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "matrix is not positive definite (pivot {diag:e} at row {i})"
                )));
            }
            env.data[ri + len] = diag.sqrt();
        }
        Ok(Self { env })
    }

    pub fn dim(&self) -> usize {
        self.env.first.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.env.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let env = &self.env;
        let n = self.dim();
        let mut y: Vec<f64> = env.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = env.first[i];
            let row = env.row(i);
            let len = i - fi;
            let s: f64 = row[..len].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[len];
        }
        for i in (0..n).rev() {
            let fi = env.first[i];
            let row = env.row(i);
            let len = i - fi;
            y[i] /= row[len];
            let yi = y[i];
            for (t, l) in row[..len].iter().enumerate() {
                y[fi + t] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in env.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Number of eigenvalues of the pencil `(a, b)` strictly below `shift`, via
/// Sylvester's law of inertia applied to `a - shift * b`. Both matrices must
/// be symmetric and `b` positive definite.
pub fn count_eigenvalues_below(
    a: &SparseSymmetricMatrix,
    b: &SparseSymmetricMatrix,
    shift: f64,
) -> Result<usize> {
    let shifted = a.add_scaled(-shift, b)?;
    let perm = shifted.rcm_ordering();
    let mut env = Envelope::from_matrix(&shifted, perm);
    let d = env.factor_ldl();
    if d.iter().any(|x| !x.is_finite() || *x == 0.0) {
        return Err(Error::NumericalFailure("zero pivot in inertia count; shift is an eigenvalue".into()));
    }
    Ok(d.iter().filter(|&&x| x < 0.0).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize) -> SparseSymmetricMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymmetricMatrix::from_triplets(n, &t)
    }

    fn random_spd(n: usize, seed: u64) -> SparseSymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, n as f64));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        SparseSymmetricMatrix::from_triplets(n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseSymmetricMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cholesky_solves_random_spd() {
        for seed in 0..5 {
            let a = random_spd(60, seed);
            let chol = SparseCholesky::new(&a).unwrap();
            let x_true: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
            let b = a.mul_vec(&x_true);
            let x = chol.solve(&b);
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = laplacian_1d(5).add_scaled(-10.0, &SparseSymmetricMatrix::from_triplets(
            5,
            &(0..5).map(|i| (i, i, 1.0)).collect::<Vec<_>>(),
        ))
        .unwrap();
        assert!(matches!(SparseCholesky::new(&a), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn inertia_matches_known_spectrum() {
        // eigenvalues of tridiag(-1, 2, -1): 2 - 2 cos(k pi / (n + 1))
        let n = 40;
        let a = laplacian_1d(n);
        let id = SparseSymmetricMatrix::from_triplets(n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        for shift in [0.05, 0.5, 1.3, 2.7, 3.99] {
            let expected = exact.iter().filter(|&&l| l < shift).count();
            assert_eq!(count_eigenvalues_below(&a, &id, shift).unwrap(), expected);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = random_spd(50, 9);
        let mut p = a.rcm_ordering();
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn submatrix_picks_entries() {
        let a = laplacian_1d(5);
        let s = a.submatrix(&[1, 2, 4]);
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(s.get(1, 2), 0.0);
        assert_eq!(s.get(2, 2), 2.0);
    }
}
