//! Envelope (profile) LDLᵀ factorization with reverse Cuthill-McKee ordering.
//!
//! Works for real symmetric positive-definite matrices and for complex
//! symmetric matrices of the form `G + jωC` with `G` SPD, where pivoting
//! is not needed.

use std::collections::VecDeque;

use num_complex::Complex64;
use num_traits::NumAssign;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

pub trait Scalar: Copy + NumAssign + Send + Sync + std::fmt::Debug + 'static {
    fn modulus(self) -> f64;
    fn from_real(v: f64) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(v: f64) -> Self {
        v
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
}

/// Reverse Cuthill-McKee permutation; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (farthest node with min degree in last level, eccentricity)
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        dist[start] = 0;
        q.push_back(start);
        let mut last = start;
        while let Some(u) = q.pop_front() {
            if dist[u] > dist[last] || (dist[u] == dist[last] && degree[u] < degree[last]) {
                last = u;
            }
            for &v in &adj[u] {
                if !visited[v] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (last, dist[last])
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut far, mut ecc) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (f2, e2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            far = f2;
            ecc = e2;
        }
        let _ = far;
        let mut q = VecDeque::new();
        visited[start] = true;
        q.push_back(start);
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (degree[v], v));
            for v in nb {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// `A = P^T L D L^T P` in envelope storage.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl<T: Scalar> {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> EnvelopeLdl<T> {
    /// Factorizes the symmetric matrix whose entries are `entry(a_ij)` for the
    /// sparsity of `pattern` (only the pattern's structure is used).
    pub fn factor_with(
        pattern: &CsrMatrix,
        perm: &[usize],
        entry: impl Fn(usize, usize, f64) -> T,
    ) -> Result<Self> {
        let n = pattern.n();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, _) in pattern.row(old_i) {
                let j = inv[old_j];
                if j < i && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![T::zero(); start[n]];
        let mut diag = vec![T::zero(); n];
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in pattern.row(old_i) {
                let j = inv[old_j];
                let val = entry(old_i, old_j, v);
                if j < i {
                    lower[start[i] + (j - first[i])] += val;
                } else if j == i {
                    diag[i] += val;
                }
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.modulus()));
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            // w_j = a_ij - sum_k w_ik l_jk for j in [fi, i)
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = lower[row_i + (j - fi)];
                if k0 < j {
                    let a_seg = &lower[row_i + (k0 - fi)..row_i + (j - fi)];
                    let b_seg = &lower[start[j] + (k0 - fj)..start[j] + (j - fj)];
                    let mut acc = T::zero();
                    for (x, y) in a_seg.iter().zip(b_seg) {
                        acc += *x * *y;
                    }
                    s -= acc;
                }
                lower[row_i + (j - fi)] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let w = lower[row_i + (j - fi)];
                let l = w / diag[j];
                d -= w * l;
                lower[row_i + (j - fi)] = l;
            }
            if d.modulus() <= 1e-14 * scale || !d.modulus().is_finite() {
                return Err(Error::Solver(format!(
                    "factorization breakdown at pivot {i} (matrix singular or not definite)"
                )));
            }
            diag[i] = d;
        }
        Ok(Self {
            n,
            perm: perm.to_vec(),
            first,
            start,
            lower,
            diag,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fill(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let mut acc = T::zero();
            for (l, yj) in row.iter().zip(&y[fi..i]) {
                acc += *l * *yj;
            }
            y[i] -= acc;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (l, yj) in row.iter().zip(y[fi..i].iter_mut()) {
                *yj -= *l * xi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

impl EnvelopeLdl<f64> {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = rcm_ordering(a);
        Self::factor_with(a, &perm, |_, _, v| v)
    }
}

/// Factorizes `G + s·diag(c)` (complex `s`) with `G`'s sparsity.
pub fn factor_shifted(
    g: &CsrMatrix,
    c_diag: &[f64],
    s: Complex64,
    perm: &[usize],
) -> Result<EnvelopeLdl<Complex64>> {
    EnvelopeLdl::factor_with(g, perm, |i, j, v| {
        if i == j {
            Complex64::new(v, 0.0) + s * c_diag[i]
        } else {
            Complex64::new(v, 0.0)
        }
    })
}
