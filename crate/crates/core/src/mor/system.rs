//! First-order symmetric RC systems `C ẋ + G x = B u`, `y = Lᵀ x + y₀`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, dense_solve_complex, factor_shifted, rcm_ordering, CsrMatrix, EnvelopeLdl};
use crate::thermal::{ThermalModel, ThermalNetwork};

/// Behaviour shared by full and reduced systems.
pub trait RcSystem {
    fn order(&self) -> usize;
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;

    /// `Lᵀ G⁻¹ B`, outputs × inputs.
    fn dc_gain(&self) -> Result<DMatrix<f64>>;

    /// `Lᵀ (G + j2πf C)⁻¹ B`.
    fn transfer(&self, frequency: f64) -> Result<DMatrix<Complex64>>;

    /// Backward-Euler response from the zero state; row `k` holds the output
    /// change at `t = (k+1)·dt`. The offset `y₀` is not included.
    fn simulate(&self, input: &dyn Fn(f64) -> Vec<f64>, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>>;
}

pub fn dc_gain(model: &dyn RcSystem) -> Result<DMatrix<f64>> {
    model.dc_gain()
}

#[derive(Debug, Clone)]
pub struct StateSpaceRC {
    pub g: CsrMatrix,
    /// Diagonal of `C`.
    pub c: Vec<f64>,
    pub b: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// Output value at zero input (for thermal networks, the port
    /// temperatures with no power).
    pub output_offset: Vec<f64>,
    pub port_names: Vec<String>,
}

fn singular(_: Error) -> Error {
    Error::Input("G is singular or not positive definite".into())
}

fn check_input(u: &[f64], m: usize) -> Result<()> {
    if u.len() != m {
        return Err(Error::Input(format!("{} input values for {m} inputs", u.len())));
    }
    Ok(())
}

impl StateSpaceRC {
    pub fn new(g: CsrMatrix, c: Vec<f64>, b: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self> {
        let n = g.n();
        if c.len() != n || b.nrows() != n || l.nrows() != n {
            return Err(Error::Input(format!(
                "inconsistent dimensions: G {n}, C {}, B {}, L {}",
                c.len(),
                b.nrows(),
                l.nrows()
            )));
        }
        if g.asymmetry() > 1e-12 {
            return Err(Error::Input("G is not symmetric".into()));
        }
        if c.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input("C must be finite and nonnegative".into()));
        }
        let p = l.ncols();
        Ok(Self {
            g,
            c,
            b,
            l,
            output_offset: vec![0.0; p],
            port_names: (0..p).map(|k| format!("out{k}")).collect(),
        })
    }

    /// Port powers in, port temperatures out (`B = L`).
    pub fn from_network(net: &ThermalNetwork) -> Self {
        let b = net.port_matrix();
        Self {
            g: net.g.clone(),
            c: net.c.clone(),
            l: b.clone(),
            b,
            output_offset: net.port_base.clone(),
            port_names: net.port_names.clone(),
        }
    }

    pub fn factor(&self) -> Result<EnvelopeLdl<f64>> {
        EnvelopeLdl::factor(&self.g).map_err(singular)
    }

    fn project_out(&self, x: &[f64]) -> Vec<f64> {
        (0..self.l.ncols())
            .map(|k| self.l.column(k).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl RcSystem for StateSpaceRC {
    fn order(&self) -> usize {
        self.g.n()
    }

    fn inputs(&self) -> usize {
        self.b.ncols()
    }

    fn outputs(&self) -> usize {
        self.l.ncols()
    }

    fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let f = self.factor()?;
        let mut h = DMatrix::zeros(self.outputs(), self.inputs());
        for j in 0..self.inputs() {
            let x = f.solve(self.b.column(j).as_slice());
            for (i, v) in self.project_out(&x).into_iter().enumerate() {
                h[(i, j)] = v;
            }
        }
        Ok(h)
    }

    fn transfer(&self, frequency: f64) -> Result<DMatrix<Complex64>> {
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * frequency);
        let f = factor_shifted(&self.g, &self.c, s, &rcm_ordering(&self.g)).map_err(singular)?;
        let mut h = DMatrix::zeros(self.outputs(), self.inputs());
        for j in 0..self.inputs() {
            let rhs: Vec<Complex64> = self.b.column(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let x = f.solve(&rhs);
            for i in 0..self.outputs() {
                h[(i, j)] = self.l.column(i).iter().zip(&x).map(|(a, b)| b * *a).sum();
            }
        }
        Ok(h)
    }

    fn simulate(&self, input: &dyn Fn(f64) -> Vec<f64>, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
        if !(dt > 0.0) {
            return Err(Error::Input("time step must be positive".into()));
        }
        let n = self.order();
        let cdt: Vec<f64> = self.c.iter().map(|c| c / dt).collect();
        let perm = rcm_ordering(&self.g);
        let f = EnvelopeLdl::factor_with(&self.g, &perm, |i, j, v| if i == j { v + cdt[i] } else { v })
            .map_err(singular)?;
        let mut x = vec![0.0; n];
        let mut out = Vec::with_capacity(steps);
        for k in 1..=steps {
            let u = input(k as f64 * dt);
            check_input(&u, self.inputs())?;
            let mut rhs: Vec<f64> = x.iter().zip(&cdt).map(|(x, c)| x * c).collect();
            for (j, uj) in u.iter().enumerate() {
                if *uj != 0.0 {
                    for (r, bv) in rhs.iter_mut().zip(self.b.column(j).iter()) {
                        *r += bv * uj;
                    }
                }
            }
            x = f.solve(&rhs);
            out.push(self.project_out(&x));
        }
        Ok(out)
    }
}

impl ThermalModel for StateSpaceRC {
    fn port_count(&self) -> usize {
        self.outputs()
    }

    fn port_names(&self) -> Vec<String> {
        self.port_names.clone()
    }

    fn steady_port_temperatures(&self, powers: &[f64]) -> Result<Vec<f64>> {
        check_input(powers, self.inputs())?;
        let h = self.dc_gain()?;
        Ok(steady(&h, powers, &self.output_offset))
    }
}

fn steady(h: &DMatrix<f64>, u: &[f64], offset: &[f64]) -> Vec<f64> {
    let y = h * nalgebra::DVector::from_column_slice(u);
    y.iter().zip(offset).map(|(a, b)| a + b).collect()
}

/// Projected system `Ĉ ż + Ĝ z = B̂ u`, `y = L̂ᵀ z + y₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    /// Orthonormal projection basis; absent for models read from text.
    pub basis: Option<DMatrix<f64>>,
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub output_offset: Vec<f64>,
    pub port_names: Vec<String>,
    /// Set when the Krylov space was exhausted before the requested order.
    pub warning: Option<String>,
}

impl ReducedModel {
    pub fn new(g: DMatrix<f64>, c: DMatrix<f64>, b: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self> {
        let q = g.nrows();
        if g.ncols() != q || c.shape() != (q, q) || b.nrows() != q || l.nrows() != q {
            return Err(Error::Input("inconsistent reduced model dimensions".into()));
        }
        let sym = |m: &DMatrix<f64>| {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            (m - m.transpose()).amax() <= 1e-10 * scale
        };
        if !sym(&g) || !sym(&c) {
            return Err(Error::Input("reduced G and C must be symmetric".into()));
        }
        let p = l.ncols();
        Ok(Self {
            basis: None,
            g,
            c,
            b,
            l,
            output_offset: vec![0.0; p],
            port_names: (0..p).map(|k| format!("out{k}")).collect(),
            warning: None,
        })
    }

    /// Whether `Ĝ` is positive definite and `Ĉ` positive semidefinite.
    pub fn is_passive(&self) -> bool {
        let tol = 1e-10;
        let eg = self.g.clone().symmetric_eigenvalues();
        let ec = self.c.clone().symmetric_eigenvalues();
        let gmax = eg.amax();
        let cmax = ec.amax();
        eg.iter().all(|&v| v > tol * gmax) && ec.iter().all(|&v| v >= -tol * cmax.max(f64::MIN_POSITIVE))
    }

    /// Decay rates `λ` with `Ĝ v = λ Ĉ v`, ascending; infinite where `Ĉ` is singular.
    pub fn decay_rates(&self) -> Result<Vec<f64>> {
        let chol = self
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Input("reduced G is not positive definite".into()))?;
        let linv = chol.l().try_inverse().ok_or_else(|| Error::Input("reduced G is singular".into()))?;
        let m = &linv * &self.c * linv.transpose();
        let sym = (&m + m.transpose()) * 0.5;
        let mut rates: Vec<f64> = sym
            .symmetric_eigenvalues()
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { f64::INFINITY })
            .collect();
        rates.sort_by(|a, b| a.total_cmp(b));
        Ok(rates)
    }
}

impl RcSystem for ReducedModel {
    fn order(&self) -> usize {
        self.g.nrows()
    }

    fn inputs(&self) -> usize {
        self.b.ncols()
    }

    fn outputs(&self) -> usize {
        self.l.ncols()
    }

    fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let x = dense_solve(&self.g, &self.b).map_err(singular)?;
        Ok(self.l.transpose() * x)
    }

    fn transfer(&self, frequency: f64) -> Result<DMatrix<Complex64>> {
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * frequency);
        let a = self.g.map(|v| Complex64::new(v, 0.0)) + self.c.map(|v| s * v);
        let x = dense_solve_complex(&a, &self.b.map(|v| Complex64::new(v, 0.0))).map_err(singular)?;
        Ok(self.l.map(|v| Complex64::new(v, 0.0)).transpose() * x)
    }

    fn simulate(&self, input: &dyn Fn(f64) -> Vec<f64>, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
        if !(dt > 0.0) {
            return Err(Error::Input("time step must be positive".into()));
        }
        let cdt = &self.c / dt;
        let lu = (&self.g + &cdt).lu();
        let q = self.order();
        let mut z = nalgebra::DVector::zeros(q);
        let lt = self.l.transpose();
        let mut out = Vec::with_capacity(steps);
        for k in 1..=steps {
            let u = input(k as f64 * dt);
            check_input(&u, self.inputs())?;
            let rhs = &cdt * &z + &self.b * nalgebra::DVector::from_column_slice(&u);
            z = lu.solve(&rhs).ok_or_else(|| singular(Error::Solver(String::new())))?;
            out.push((&lt * &z).iter().copied().collect());
        }
        Ok(out)
    }
}

impl ThermalModel for ReducedModel {
    fn port_count(&self) -> usize {
        self.outputs()
    }

    fn port_names(&self) -> Vec<String> {
        self.port_names.clone()
    }

    fn steady_port_temperatures(&self, powers: &[f64]) -> Result<Vec<f64>> {
        check_input(powers, self.inputs())?;
        let h = self.dc_gain()?;
        Ok(steady(&h, powers, &self.output_offset))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    /// Grounded RC ladder, input and output at node 0.
    pub(crate) fn ladder(n: usize, r: f64, c: f64) -> StateSpaceRC {
        let mut t = TripletBuilder::new(n);
        t.add(n - 1, n - 1, 1.0 / r);
        for i in 0..n - 1 {
            t.add_conductance(i, i + 1, 1.0 / r);
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        StateSpaceRC::new(t.build(), vec![c; n], b.clone(), b).unwrap()
    }

    #[test]
    fn ladder_dc_gain_is_series_resistance() {
        let s = ladder(5, 2.0, 1e-3);
        let h = s.dc_gain().unwrap();
        assert!((h[(0, 0)] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_rc_step() {
        let s = ladder(1, 1.0, 1.0);
        let y = s.simulate(&|_| vec![1.0], 1e-3, 1000).unwrap();
        // backward Euler: y_k = 1 - (1+dt)^-k
        let exact = 1.0 - (1.0f64 + 1e-3).powi(-1000);
        assert!((y[999][0] - exact).abs() < 1e-12);
    }

    #[test]
    fn transfer_at_zero_is_dc_gain() {
        let s = ladder(4, 1.0, 1.0);
        let h = s.transfer(0.0).unwrap();
        assert!((h[(0, 0)].re - 4.0).abs() < 1e-12 && h[(0, 0)].im == 0.0);
        let h1 = s.transfer(1.0).unwrap();
        assert!(h1[(0, 0)].norm() < 4.0);
    }

    #[test]
    fn singular_g_is_input_error() {
        let mut t = TripletBuilder::new(2);
        t.add_conductance(0, 1, 1.0);
        let b = DMatrix::from_element(2, 1, 1.0);
        let s = StateSpaceRC::new(t.build(), vec![1.0; 2], b.clone(), b).unwrap();
        assert!(matches!(s.dc_gain(), Err(Error::Input(_))));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let b = DMatrix::zeros(3, 1);
        assert!(StateSpaceRC::new(CsrMatrix::identity(2), vec![1.0; 2], b.clone(), b).is_err());
        let b = DMatrix::zeros(2, 1);
        assert!(StateSpaceRC::new(CsrMatrix::identity(2), vec![-1.0, 1.0], b.clone(), b).is_err());
    }
}
