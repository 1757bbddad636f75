//! Block Arnoldi at s = 0 with congruence projection.

use nalgebra::DMatrix;

use super::system::{RcSystem, ReducedModel, StateSpaceRC};
use crate::error::{Error, Result};

/// Columns whose norm falls below this fraction of their pre-orthogonalization
/// norm are dropped.
pub const DEFLATION_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two passes of modified Gram-Schmidt against `basis`. Returns the
/// normalized vector, or `None` if it deflates.
fn orthogonalize(mut w: Vec<f64>, basis: &[Vec<f64>], reference: f64) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for v in basis {
            let h = dot(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= h * vi;
            }
        }
    }
    let nw = norm(&w);
    if !(nw > DEFLATION_TOL * reference) {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= nw);
    Some(w)
}

/// Reduces `sys` to order `q` by projecting onto the block Krylov space of
/// `(G⁻¹C, G⁻¹B)`. If deflation exhausts the space early, the model has the
/// achieved order and carries a warning.
pub fn reduce_arnoldi(sys: &StateSpaceRC, q: usize) -> Result<ReducedModel> {
    let n = sys.order();
    let m = sys.inputs();
    if m == 0 {
        return Err(Error::Input("system has no inputs".into()));
    }
    if q > n || q < m {
        return Err(Error::Input(format!("order {q} must lie in [{m}, {n}]")));
    }
    let f = sys.factor()?;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(q);

    // starting block G⁻¹B; deflate relative to the block norm
    let start: Vec<Vec<f64>> = (0..m).map(|j| f.solve(sys.b.column(j).as_slice())).collect();
    let block_norm = start.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if !(block_norm > 0.0) {
        return Err(Error::Input("input map B is zero".into()));
    }
    for w in start {
        if basis.len() == q {
            break;
        }
        if let Some(v) = orthogonalize(w, &basis, block_norm) {
            basis.push(v);
        }
    }

    // each basis vector in turn spawns G⁻¹C v; this keeps block order
    let mut next = 0;
    while basis.len() < q && next < basis.len() {
        let cv: Vec<f64> = basis[next].iter().zip(&sys.c).map(|(v, c)| v * c).collect();
        let w = f.solve(&cv);
        let reference = norm(&w);
        if reference > 0.0 {
            if let Some(v) = orthogonalize(w, &basis, reference) {
                basis.push(v);
            }
        }
        next += 1;
    }

    let k = basis.len();
    let v = DMatrix::from_fn(n, k, |i, j| basis[j][i]);
    let mut gv = DMatrix::zeros(n, k);
    for (j, col) in basis.iter().enumerate() {
        gv.set_column(j, &nalgebra::DVector::from_vec(sys.g.mul_vec(col)));
    }
    let cv = DMatrix::from_fn(n, k, |i, j| sys.c[i] * basis[j][i]);
    let vt = v.transpose();
    let sym = |a: DMatrix<f64>| (&a + a.transpose()) * 0.5;
    let g = sym(&vt * gv);
    let c = sym(&vt * cv);
    let b = &vt * &sys.b;
    let l = &vt * &sys.l;
    let mut red = ReducedModel::new(g, c, b, l)?;
    red.basis = Some(v);
    red.output_offset = sys.output_offset.clone();
    red.port_names = sys.port_names.clone();
    if k < q {
        red.warning = Some(format!("Krylov space exhausted at order {k} of {q} requested"));
    }
    Ok(red)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use crate::mor::system::tests::ladder;

    fn grid_system(nx: usize, ny: usize, ports: &[usize]) -> StateSpaceRC {
        let n = nx * ny;
        let mut t = TripletBuilder::new(n);
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                if x + 1 < nx {
                    t.add_conductance(i, i + 1, 1.0 + 0.1 * y as f64);
                }
                if y + 1 < ny {
                    t.add_conductance(i, i + nx, 2.0);
                }
                if y == 0 {
                    t.add(i, i, 0.5);
                }
            }
        }
        let mut b = DMatrix::zeros(n, ports.len());
        for (k, &p) in ports.iter().enumerate() {
            b[(p, k)] = 1.0;
        }
        let c = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        StateSpaceRC::new(t.build(), c, b.clone(), b).unwrap()
    }

    #[test]
    fn single_node_is_exact() {
        let s = ladder(1, 2.0, 3.0);
        let r = reduce_arnoldi(&s, 1).unwrap();
        assert!((r.g[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r.c[(0, 0)] - 3.0).abs() < 1e-15);
        assert!((r.b[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let a = s.simulate(&|_| vec![1.0], 0.1, 50).unwrap();
        let b = r.simulate(&|_| vec![1.0], 0.1, 50).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn dc_gain_matched() {
        let s = grid_system(12, 10, &[5, 113]);
        let full = s.dc_gain().unwrap();
        for q in [2, 3, 6, 10] {
            let r = reduce_arnoldi(&s, q).unwrap();
            let red = r.dc_gain().unwrap();
            assert!((&full - &red).amax() <= 1e-10 * full.amax(), "q={q}");
            assert!(r.is_passive());
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let s = grid_system(15, 15, &[0, 224]);
        let r = reduce_arnoldi(&s, 20).unwrap();
        let v = r.basis.as_ref().unwrap();
        let e = v.transpose() * v - DMatrix::identity(20, 20);
        assert!(e.amax() < 1e-10);
    }

    #[test]
    fn full_order_matches_transfer() {
        let s = grid_system(4, 3, &[0, 7]);
        let r = reduce_arnoldi(&s, 12).unwrap();
        for f in [0.0, 0.01, 0.3, 10.0] {
            let a = s.transfer(f).unwrap();
            let b = r.transfer(f).unwrap();
            let d = (&a - &b).map(|z| z.norm()).amax();
            assert!(d <= 1e-8 * a.map(|z| z.norm()).amax(), "f={f}");
        }
    }

    #[test]
    fn deflation_flags_breakdown() {
        // identical columns deflate; a single uniform RC node saturates at order 1
        let mut t = TripletBuilder::new(3);
        for i in 0..3 {
            t.add(i, i, 1.0);
        }
        let b = DMatrix::from_fn(3, 2, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let s = StateSpaceRC::new(t.build(), vec![1.0; 3], b.clone(), b).unwrap();
        let r = reduce_arnoldi(&s, 3).unwrap();
        assert_eq!(r.order(), 1);
        assert!(r.warning.is_some());
        assert!((r.dc_gain().unwrap() - s.dc_gain().unwrap()).amax() < 1e-14);
    }

    #[test]
    fn order_bounds() {
        let s = grid_system(3, 3, &[0, 1]);
        assert!(matches!(reduce_arnoldi(&s, 1), Err(Error::Input(_))));
        assert!(matches!(reduce_arnoldi(&s, 10), Err(Error::Input(_))));
    }
}
