//! Preconditioned conjugate gradients for symmetric positive-definite systems.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Zero fill-in incomplete Cholesky; falls back to Jacobi on breakdown.
    #[default]
    IncompleteCholesky,
}

#[derive(Debug, Clone, Copy)]
pub struct PcgOptions {
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 20_000,
            preconditioner: Preconditioner::IncompleteCholesky,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PcgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

enum Prec {
    Identity,
    Diagonal(Vec<f64>),
    Ic0(Ic0),
}

impl Prec {
    fn build(a: &CsrMatrix, kind: Preconditioner) -> Prec {
        match kind {
            Preconditioner::None => Prec::Identity,
            Preconditioner::Jacobi => Prec::Diagonal(inv_diag(a)),
            Preconditioner::IncompleteCholesky => match Ic0::factor(a) {
                Some(f) => Prec::Ic0(f),
                None => Prec::Diagonal(inv_diag(a)),
            },
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Prec::Identity => z.copy_from_slice(r),
            Prec::Diagonal(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = ri * di;
                }
            }
            Prec::Ic0(f) => f.solve(r, z),
        }
    }
}

fn inv_diag(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Lower-triangular incomplete Cholesky factor with the sparsity of `tril(A)`.
struct Ic0 {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Ic0 {
    fn factor(a: &CsrMatrix) -> Option<Ic0> {
        let n = a.n();
        let (rp, ci, av) = a.raw();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            let mut has_diag = false;
            for k in rp[i]..rp[i + 1] {
                let j = ci[k];
                if j < i {
                    cols.push(j);
                    vals.push(av[k]);
                } else if j == i {
                    has_diag = true;
                }
            }
            cols.push(i);
            vals.push(if has_diag { a.get(i, i) } else { 0.0 });
            row_ptr[i + 1] = cols.len();
        }
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            for p in s..e - 1 {
                let k = cols[p];
                // dot of row i and row k over columns < k
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1] - 1);
                let mut acc = 0.0;
                let (mut a_ptr, mut b_ptr) = (s, ks);
                while a_ptr < p && b_ptr < ke {
                    let (ca, cb) = (cols[a_ptr], cols[b_ptr]);
                    if ca == cb {
                        acc += vals[a_ptr] * vals[b_ptr];
                        a_ptr += 1;
                        b_ptr += 1;
                    } else if ca < cb {
                        a_ptr += 1;
                    } else {
                        b_ptr += 1;
                    }
                }
                vals[p] = (vals[p] - acc) / vals[ke];
            }
            let mut d = vals[e - 1];
            for p in s..e - 1 {
                d -= vals[p] * vals[p];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            vals[e - 1] = d.sqrt();
        }
        Some(Ic0 {
            row_ptr,
            cols,
            vals,
        })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        // L y = r
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = r[i];
            for p in s..e - 1 {
                acc -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = acc / self.vals[e - 1];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.vals[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.cols[p]] -= self.vals[p] * zi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b`; `x` holds the initial guess on entry.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &PcgOptions) -> Result<PcgStats> {
    let n = a.n();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(PcgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let prec = Prec::build(a, opts.preconditioner);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    for it in 0..opts.max_iter {
        if rel <= opts.rel_tol {
            return Ok(PcgStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!(
                "conjugate gradients: matrix not positive definite (p'Ap = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        prec.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
    }
    // recompute true residual before giving up
    a.matvec(x, &mut r);
    let true_rel = r
        .iter()
        .zip(b)
        .map(|(ax, bi)| (bi - ax).powi(2))
        .sum::<f64>()
        .sqrt()
        / bnorm;
    if true_rel <= opts.rel_tol {
        return Ok(PcgStats {
            iterations: opts.max_iter,
            relative_residual: true_rel,
        });
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        message: format!("conjugate gradients stalled at relative residual {true_rel:e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn all_preconditioners_agree() {
        let a = laplace_1d(50);
        let rhs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut sols = Vec::new();
        for p in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::IncompleteCholesky,
        ] {
            let mut x = vec![0.0; 50];
            let opts = PcgOptions {
                rel_tol: 1e-12,
                preconditioner: p,
                ..Default::default()
            };
            pcg(&a, &rhs, &mut x, &opts).unwrap();
            let ax = a.mul_vec(&x);
            for (l, r) in ax.iter().zip(&rhs) {
                assert!((l - r).abs() < 1e-9);
            }
            sols.push(x);
        }
        for k in 0..50 {
            assert!((sols[0][k] - sols[2][k]).abs() < 1e-8);
        }
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // no fill-in occurs, so one iteration suffices
        let a = laplace_1d(30);
        let rhs = vec![1.0; 30];
        let mut x = vec![0.0; 30];
        let st = pcg(&a, &rhs, &mut x, &PcgOptions::default()).unwrap();
        assert!(st.iterations <= 2, "{}", st.iterations);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(4);
        let mut x = vec![1.0; 4];
        pcg(&a, &[0.0; 4], &mut x, &PcgOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
    }
}
