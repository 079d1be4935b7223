//! Compressed sparse row matrices and a profile Cholesky factorisation.
//!
//! The Gram matrices in this crate come from Cartesian meshes and are
//! band-structured, so a reverse Cuthill–McKee ordering followed by an
//! envelope (skyline) factorisation is enough.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not SPD: pivot {pivot} is {value:e}")]
    NotSpd { pivot: usize, value: f64 },
}

fn check_len(expected: usize, got: usize) -> Result<(), LinalgError> {
    if expected == got {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, got })
    }
}

/// Row-compressed sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in the order they appear, so the result is
    /// bitwise reproducible for a fixed triplet sequence.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; rows + 1];
        for &(i, j, _) in triplets {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) outside {rows}x{cols}");
            count[i + 1] += 1;
        }
        for i in 0..rows {
            count[i + 1] += count[i];
        }
        // Bucket by row (stable), then sort each row by column (stable).
        let mut order = vec![0usize; triplets.len()];
        let mut next = count.clone();
        for (t, &(i, _, _)) in triplets.iter().enumerate() {
            order[next[i]] = t;
            next[i] += 1;
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..rows {
            let row = &mut order[count[i]..count[i + 1]];
            row.sort_by_key(|&t| triplets[t].1);
            for &t in row.iter() {
                let (_, j, v) = triplets[t];
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { rows, cols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { rows: n, cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let mut t = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows, cols, &t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| val[k])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                d[i * self.cols + j] = v;
            }
        }
        d
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect())
    }

    /// `Aᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.rows, x.len())?;
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            t.extend(idx.iter().zip(val).map(|(&j, &v)| (j, i, v)));
        }
        Self::from_triplets(self.cols, self.rows, &t)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self, LinalgError> {
        check_len(self.cols, other.rows)?;
        let mut acc = vec![0.0; other.cols];
        let mut seen = vec![usize::MAX; other.cols];
        let mut t = Vec::new();
        for i in 0..self.rows {
            let mut cols = Vec::new();
            let (idx, val) = self.row(i);
            for (&k, &a) in idx.iter().zip(val) {
                let (oidx, oval) = other.row(k);
                for (&j, &b) in oidx.iter().zip(oval) {
                    if seen[j] != i {
                        seen[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            t.extend(cols.into_iter().map(|j| (i, j, acc[j])));
        }
        Ok(Self::from_triplets(self.rows, other.cols, &t))
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Result<Self, LinalgError> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, 1.0), (other, alpha)] {
            for i in 0..m.rows {
                let (idx, val) = m.row(i);
                t.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j, s * v)));
            }
        }
        Ok(Self::from_triplets(self.rows, self.cols, &t))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Reverse Cuthill–McKee ordering of the (symmetrised) pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P B Pᵀ = L Lᵀ`.
///
/// Row `i` of `L` is stored densely from column `first[i]` to the diagonal.
#[derive(Debug)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
    solves: AtomicUsize,
}

impl Clone for CholeskyFactor {
    fn clone(&self) -> Self {
        CholeskyFactor {
            n: self.n,
            perm: self.perm.clone(),
            first: self.first.clone(),
            start: self.start.clone(),
            l: self.l.clone(),
            solves: AtomicUsize::new(self.solve_count()),
        }
    }
}

impl CholeskyFactor {
    /// Factorises a symmetric matrix after an RCM reordering. Only the lower
    /// triangle of the permuted matrix is read.
    pub fn new(b: &CsrMatrix) -> Result<Self, LinalgError> {
        let perm = reverse_cuthill_mckee(b);
        Self::with_ordering(b, perm)
    }

    /// Factorises with a caller-supplied ordering (`perm[new] = old`).
    pub fn with_ordering(b: &CsrMatrix, perm: Vec<usize>) -> Result<Self, LinalgError> {
        if b.rows() != b.cols() {
            return Err(LinalgError::NotSquare { rows: b.rows(), cols: b.cols() });
        }
        let n = b.rows();
        check_len(n, perm.len())?;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // Permuted lower-triangle entries, row by row.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for old_i in 0..n {
            let i = inv[old_i];
            let (idx, val) = b.row(old_i);
            for (&old_j, &v) in idx.iter().zip(val) {
                let j = inv[old_j];
                if j <= i {
                    rows[i].push((j, v));
                }
            }
        }
        let first: Vec<usize> =
            rows.iter().enumerate().map(|(i, r)| r.iter().map(|&(j, _)| j).min().unwrap_or(i)).collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut l = vec![0.0; start[n]];
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in r {
                l[start[i] + j - first[i]] += v;
            }
        }
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let k0 = fi.max(fj);
                let mut s = l[si + j - fi];
                for k in k0..j {
                    s -= l[si + k - fi] * l[sj + k - fj];
                }
                l[si + j - fi] = s / l[sj + j - fj];
            }
            let mut d = l[si + i - fi];
            for k in fi..i {
                let v = l[si + k - fi];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotSpd { pivot: i, value: d });
            }
            l[si + i - fi] = d.sqrt();
        }
        Ok(CholeskyFactor { n, perm, first, start, l, solves: AtomicUsize::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Stored entries of `L`, including explicit zeros inside the envelope.
    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    /// Entry `L[i][j]` of the factor of the permuted matrix.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i || j < self.first[i] {
            0.0
        } else {
            self.l[self.start[i] + j - self.first[i]]
        }
    }

    /// Number of solves performed with this factor.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Solves `B x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.n, rhs.len())?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.l[si + k - fi] * y[k];
            }
            y[i] = s / self.l[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            let xi = y[i] / self.l[si + i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.l[si + k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 2D five-point Laplacian plus identity on an `n x n` grid.
    fn grid_spd(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                t.push((k, k, 5.0));
                if i + 1 < n {
                    t.push((k, k + 1, -1.0));
                    t.push((k + 1, k, -1.0));
                }
                if j + 1 < n {
                    t.push((k, k + n, -1.0));
                    t.push((k + n, k, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n * n, n * n, &t)
    }

    fn dense(a: &CsrMatrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(a.rows(), a.cols(), &a.to_dense())
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.row(1).0, &[0, 2]);
        assert_eq!(a.get(1, 2), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn spmv_on_a_known_matrix() {
        let a = CsrMatrix::from_dense(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 5.0, 0.0, 6.0]);
        assert_eq!(a.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![5.0, 18.0, 23.0]);
        assert_eq!(a.spmv_transpose(&[1.0, 2.0, 3.0]).unwrap(), vec![16.0, 8.0, 26.0]);
        assert!(matches!(a.spmv(&[1.0]), Err(LinalgError::DimensionMismatch { expected: 3, got: 1 })));
    }

    #[test]
    fn cholesky_of_identity_is_identity() {
        let f = CholeskyFactor::new(&CsrMatrix::identity(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(f.lower(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let r = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.solve(&r).unwrap(), r);
    }

    #[test]
    fn cholesky_two_by_two_closed_form() {
        let b = CsrMatrix::from_dense(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = CholeskyFactor::with_ordering(&b, vec![0, 1]).unwrap();
        assert_eq!(f.lower(0, 0), 2.0);
        assert_eq!(f.lower(1, 0), 1.0);
        assert!((f.lower(1, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn not_spd_is_reported() {
        let b = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CholeskyFactor::new(&b), Err(LinalgError::NotSpd { .. })));
    }

    #[test]
    fn factor_reconstructs_permuted_matrix() {
        let b = grid_spd(7);
        let f = CholeskyFactor::new(&b).unwrap();
        let n = b.rows();
        let p = f.permutation();
        let bd = dense(&b);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let llt: f64 = (0..=j).map(|k| f.lower(i, k) * f.lower(j, k)).sum();
                worst = worst.max((llt - bd[(p[i], p[j])]).abs());
            }
        }
        assert!(worst < 1e-10 * 5.0);
    }

    #[test]
    fn rcm_reduces_the_envelope_of_a_scrambled_band() {
        let b = grid_spd(12);
        let n = b.rows();
        // A scrambled numbering of the same operator.
        let scramble: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            let (idx, val) = b.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                t.push((scramble[i], scramble[j], v));
            }
        }
        let s = CsrMatrix::from_triplets(n, n, &t);
        let natural = CholeskyFactor::with_ordering(&s, (0..n).collect()).unwrap();
        let rcm = CholeskyFactor::new(&s).unwrap();
        assert!(rcm.envelope_size() * 3 < natural.envelope_size());
    }

    #[test]
    fn solve_matches_dense_oracle_and_counts() {
        let b = grid_spd(9);
        let f = CholeskyFactor::new(&b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<f64> = (0..b.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = f.solve(&r).unwrap();
        let oracle = dense(&b).lu().solve(&DVector::from_vec(r.clone())).unwrap();
        for (a, e) in x.iter().zip(oracle.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
        for _ in 0..1000 {
            f.solve(&r).unwrap();
        }
        assert_eq!(f.solve_count(), 1001);
    }

    #[test]
    fn matmul_and_transpose_match_dense() {
        let a = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.0]);
        let b = CsrMatrix::from_dense(3, 2, &[0.0, 1.0, 4.0, 0.0, 0.5, 2.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(dense(&c), dense(&a) * dense(&b));
        assert_eq!(dense(&a.transpose()), dense(&a).transpose());
        let s = c.add_scaled(&CsrMatrix::identity(2), 2.0).unwrap();
        assert_eq!(s.get(0, 0), c.get(0, 0) + 2.0);
    }

    proptest! {
        #[test]
        fn adjoint_identity(seed in 0u64..1000, rows in 1usize..12, cols in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<_> = (0..rows * cols / 2 + 1)
                .map(|_| (rng.random_range(0..rows), rng.random_range(0..cols), rng.random_range(-1.0..1.0)))
                .collect();
            let a = CsrMatrix::from_triplets(rows, cols, &t);
            let x: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dot(&a.spmv_transpose(&x).unwrap(), &y);
            let rhs = dot(&x, &a.spmv(&y).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn solve_inverts_multiplication(seed in 0u64..1000, n in 2usize..8) {
            let b = grid_spd(n);
            let f = CholeskyFactor::new(&b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..b.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = f.solve(&b.spmv(&x).unwrap()).unwrap();
            let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, e) in y.iter().zip(&x) {
                prop_assert!((a - e).abs() <= 1e-9 * scale);
            }
        }
    }
}
