//! Per-unit-length volume filament model of parallel conductors.
//!
//! The cross-section is split into square filaments; each carries a uniform
//! axial current. Filaments of one group share the axial field `E_g`, and the
//! group's total current is prescribed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CrossSectionMask;
use crate::MU0;

/// GMD of a square of side h with itself, in units of h.
pub const SQUARE_SELF_GMD: f64 = 0.44705;
pub const DEFAULT_REFERENCE_RADIUS: f64 = 100e-6;
pub const MAX_FILAMENTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Filament {
    pub x: f64,
    pub y: f64,
    pub area: f64,
    pub group: usize,
}

#[derive(Debug, Clone)]
pub struct FilamentSystem {
    pub filaments: Vec<Filament>,
    /// Ω/m
    pub resistance: Vec<f64>,
    /// H/m, relative to a coaxial return at `reference_radius`.
    pub mutual: DMatrix<f64>,
    /// Prescribed total current per group, A.
    pub group_current: Vec<Complex64>,
    pub reference_radius: f64,
    /// Mask row-major cell index of every filament, for map output.
    pub cell_index: Vec<usize>,
    pub mask_shape: (usize, usize),
}

/// Builds one filament per labeled cell.
///
/// `conductivity[g]` is the conductivity of group `g`. Group 0 carries 1 A and
/// all others 0 A; override with [`FilamentSystem::set_group_currents`].
pub fn discretize_filaments(
    mask: &CrossSectionMask,
    conductivity: &[f64],
    reference_radius: f64,
) -> Result<FilamentSystem> {
    let ng = mask.group_count();
    if conductivity.len() < ng {
        return Err(Error::Input(format!(
            "{ng} conductor groups but {} conductivities",
            conductivity.len()
        )));
    }
    for (g, &s) in conductivity.iter().take(ng).enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Physics(format!(
                "conductor group {g} has conductivity {s}; filaments need sigma > 0"
            )));
        }
    }
    if !(reference_radius > 0.0) {
        return Err(Error::Input("reference radius must be > 0".into()));
    }
    let n = mask.labeled_count();
    if n > MAX_FILAMENTS {
        return Err(Error::Resource(format!(
            "{n} filaments exceed the dense-solver limit of {MAX_FILAMENTS}; use coarser cells"
        )));
    }
    let mut filaments = Vec::with_capacity(n);
    let mut cell_index = Vec::with_capacity(n);
    for (ix, iy, group, area) in mask.labeled() {
        let [x, y] = mask.cell_center(ix, iy);
        filaments.push(Filament { x, y, area, group });
        cell_index.push(iy * mask.nx + ix);
    }
    let resistance = filaments
        .iter()
        .map(|f| 1.0 / (conductivity[f.group] * f.area))
        .collect();
    let mutual = mutual_matrix(&filaments, reference_radius);
    let mut group_current = vec![Complex64::new(0.0, 0.0); ng];
    group_current[0] = Complex64::new(1.0, 0.0);
    Ok(FilamentSystem {
        filaments,
        resistance,
        mutual,
        group_current,
        reference_radius,
        cell_index,
        mask_shape: (mask.nx, mask.ny),
    })
}

fn mutual_matrix(fil: &[Filament], r_ref: f64) -> DMatrix<f64> {
    let n = fil.len();
    let k = MU0 / (2.0 * PI);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        // an equal-area square stands in for cells rescaled to exact area
        let gmd = SQUARE_SELF_GMD * fil[i].area.sqrt();
        m[(i, i)] = k * (r_ref / gmd).ln();
        for j in 0..i {
            let d = (fil[i].x - fil[j].x).hypot(fil[i].y - fil[j].y);
            let v = k * (r_ref / d).ln();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

impl FilamentSystem {
    pub fn len(&self) -> usize {
        self.filaments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filaments.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.group_current.len()
    }

    pub fn set_group_currents(&mut self, currents: &[Complex64]) -> Result<()> {
        if currents.len() != self.group_count() {
            return Err(Error::Input(format!(
                "expected {} group currents, got {}",
                self.group_count(),
                currents.len()
            )));
        }
        self.group_current = currents.to_vec();
        Ok(())
    }

    pub fn group_area(&self, g: usize) -> f64 {
        self.filaments.iter().filter(|f| f.group == g).map(|f| f.area).sum()
    }

    /// Parallel combination of the filament resistances of group `g`, Ω/m.
    pub fn dc_resistance(&self, g: usize) -> f64 {
        let conductance: f64 = self
            .filaments
            .iter()
            .zip(&self.resistance)
            .filter(|(f, _)| f.group == g)
            .map(|(_, r)| 1.0 / r)
            .sum();
        1.0 / conductance
    }

    /// Shifts every mutual entry by `c` (a change of reference radius).
    pub fn with_reference_radius(&self, r_ref: f64) -> FilamentSystem {
        let shift = MU0 / (2.0 * PI) * (r_ref / self.reference_radius).ln();
        let mut out = self.clone();
        out.mutual.add_scalar_mut(shift);
        out.reference_radius = r_ref;
        out
    }
}

/// Per-filament complex current density relative to its DC value.
#[derive(Debug, Clone)]
pub struct CurrentDensityMap {
    pub frequency: f64,
    pub normalized: Vec<Complex64>,
}

/// Result of one frequency point.
#[derive(Debug, Clone)]
pub struct ImpedancePoint {
    pub frequency: f64,
    /// `E_g / I_g` for every group, `None` for groups without prescribed current.
    pub group_impedance: Vec<Option<Complex64>>,
    /// Inductance per group, H/m (`None` as above).
    pub group_inductance: Vec<Option<f64>>,
    /// Dissipation-based resistance normalized to the group-0 current, Ω/m.
    pub r_eff: f64,
    /// Stored-energy inductance normalized to the group-0 current, H/m.
    pub l_eff: f64,
    pub field: Vec<Complex64>,
    pub currents: Vec<Complex64>,
}

/// Precomputed spectral form of `R + jωM` for fast frequency sweeps.
///
/// With `S = R^{-1/2}` and `S M S = Q Λ Qᵀ`, the filament admittance is
/// `S Q (I + jωΛ)^{-1} Qᵀ S`.
pub struct FilamentSolver<'a> {
    system: &'a FilamentSystem,
    scale: Vec<f64>,
    q: DMatrix<f64>,
    lambda: DVector<f64>,
    w: DMatrix<f64>,
    dc_density: Vec<f64>,
}

impl<'a> FilamentSolver<'a> {
    pub fn new(system: &'a FilamentSystem) -> Result<Self> {
        let n = system.len();
        let ng = system.group_count();
        if n == 0 {
            return Err(Error::Solver("filament system is empty".into()));
        }
        let scale: Vec<f64> = system.resistance.iter().map(|r| 1.0 / r.sqrt()).collect();
        let mut a = system.mutual.clone();
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] *= scale[i] * scale[j];
            }
        }
        let eig = SymmetricEigen::new(a);
        let q = eig.eigenvectors;
        let lambda = eig.eigenvalues;
        let mut w = DMatrix::zeros(n, ng);
        for (i, f) in system.filaments.iter().enumerate() {
            let s = scale[i];
            for k in 0..n {
                w[(k, f.group)] += q[(i, k)] * s;
            }
        }
        let mut solver = FilamentSolver {
            system,
            scale,
            q,
            lambda,
            w,
            dc_density: Vec::new(),
        };
        solver.dc_density = solver.dc_reference_density()?;
        Ok(solver)
    }

    fn dc_reference_density(&self) -> Result<Vec<f64>> {
        let sys = self.system;
        // at DC the field per group drives I_i = E_g / R_i
        let mut g_sum = vec![0.0; sys.group_count()];
        for (f, r) in sys.filaments.iter().zip(&sys.resistance) {
            g_sum[f.group] += 1.0 / r;
        }
        let i0 = sys.group_current[0].norm();
        let fallback = if i0 > 0.0 {
            i0 / sys.group_area(0)
        } else {
            sys.group_current.iter().map(|c| c.norm()).fold(0.0, f64::max)
                / sys.group_area(0).max(f64::MIN_POSITIVE)
        };
        Ok(sys
            .filaments
            .iter()
            .zip(&sys.resistance)
            .map(|(f, r)| {
                let e = sys.group_current[f.group].norm() / g_sum[f.group];
                let j = e / r / f.area;
                if j > 0.0 {
                    j
                } else {
                    fallback
                }
            })
            .collect())
    }

    fn admittance(&self, dg: &[Complex64]) -> DMatrix<Complex64> {
        let (n, ng) = (self.w.nrows(), self.w.ncols());
        let mut y = DMatrix::from_element(ng, ng, Complex64::new(0.0, 0.0));
        for a in 0..ng {
            for b in 0..=a {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += dg[k] * (self.w[(k, a)] * self.w[(k, b)]);
                }
                y[(a, b)] = acc;
                y[(b, a)] = acc;
            }
        }
        y
    }

    fn solve_groups(&self, y: &DMatrix<Complex64>, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let b = DVector::from_column_slice(rhs);
        let e = y
            .clone()
            .lu()
            .solve(&b)
            .filter(|e| e.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
            .ok_or_else(|| Error::Solver("singular group admittance matrix".into()))?;
        Ok(e.iter().copied().collect())
    }

    pub fn solve(&self, frequency: f64) -> Result<(ImpedancePoint, CurrentDensityMap)> {
        let sys = self.system;
        if !(frequency >= 0.0 && frequency.is_finite()) {
            return Err(Error::Input(format!("frequency must be >= 0 (got {frequency})")));
        }
        if sys.group_current.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Solver("all prescribed group currents are zero".into()));
        }
        let n = sys.len();
        let ng = sys.group_count();
        let omega = 2.0 * PI * frequency;
        let dg: Vec<Complex64> = self
            .lambda
            .iter()
            .map(|&l| Complex64::new(1.0, omega * l).inv())
            .collect();
        let y = self.admittance(&dg);
        let e = self.solve_groups(&y, &sys.group_current)?;

        // u = dg ∘ (W E), I = S Q u
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for g in 0..ng {
                acc += e[g] * self.w[(k, g)];
            }
            u[k] = dg[k] * acc;
        }
        let mut currents = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let uk = u[k];
            let col = self.q.column(k);
            for i in 0..n {
                currents[i] += uk * col[i];
            }
        }
        for (c, s) in currents.iter_mut().zip(&self.scale) {
            *c *= *s;
        }

        let group_impedance: Vec<Option<Complex64>> = (0..ng)
            .map(|g| (sys.group_current[g].norm() > 0.0).then(|| e[g] / sys.group_current[g]))
            .collect();
        let group_inductance = if omega > 0.0 {
            group_impedance.iter().map(|z| z.map(|z| z.im / omega)).collect()
        } else {
            // dE/dω at 0 equals j·Y0⁻¹ Wᵀ Λ W E0
            let we: Vec<Complex64> = (0..n)
                .map(|k| (0..ng).map(|g| e[g] * self.w[(k, g)]).sum::<Complex64>() * self.lambda[k])
                .collect();
            let rhs: Vec<Complex64> = (0..ng)
                .map(|g| (0..n).map(|k| we[k] * self.w[(k, g)]).sum())
                .collect();
            let x = self.solve_groups(&y, &rhs)?;
            (0..ng)
                .map(|g| {
                    let ig = sys.group_current[g];
                    (ig.norm() > 0.0).then(|| (x[g] / ig).re)
                })
                .collect()
        };

        let i0 = sys.group_current[0].norm_sqr();
        let norm = if i0 > 0.0 {
            i0
        } else {
            sys.group_current.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
        };
        let r_eff = sys
            .resistance
            .iter()
            .zip(&currents)
            .map(|(r, i)| r * i.norm_sqr())
            .sum::<f64>()
            / norm;
        // I^H M I is real for real symmetric M
        let mut energy = 0.0;
        for j in 0..n {
            let col = sys.mutual.column(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += currents[i].conj() * col[i];
            }
            energy += (acc * currents[j]).re;
        }
        let l_eff = energy / norm;

        let normalized = currents
            .iter()
            .zip(&sys.filaments)
            .zip(&self.dc_density)
            .map(|((i, f), j0)| *i / f.area / *j0)
            .collect();
        Ok((
            ImpedancePoint {
                frequency,
                group_impedance,
                group_inductance,
                r_eff,
                l_eff,
                field: e,
                currents,
            },
            CurrentDensityMap {
                frequency,
                normalized,
            },
        ))
    }
}

pub fn solve_impedance(
    system: &FilamentSystem,
    frequency: f64,
) -> Result<(ImpedancePoint, CurrentDensityMap)> {
    FilamentSolver::new(system)?.solve(frequency)
}

/// Reference route: one dense complex LU of the bordered system
/// `[Z -A; Aᵀ 0] [I; E] = [0; I_g]`.
pub fn solve_impedance_direct(system: &FilamentSystem, frequency: f64) -> Result<ImpedancePoint> {
    let n = system.len();
    let ng = system.group_count();
    let omega = 2.0 * PI * frequency;
    let dim = n + ng;
    let mut a = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = Complex64::new(0.0, omega * system.mutual[(i, j)]);
        }
        a[(j, j)] += system.resistance[j];
        let g = system.filaments[j].group;
        a[(j, n + g)] = Complex64::new(-1.0, 0.0);
        a[(n + g, j)] = Complex64::new(1.0, 0.0);
    }
    let mut b = DMatrix::from_element(dim, 1, Complex64::new(0.0, 0.0));
    for g in 0..ng {
        b[(n + g, 0)] = system.group_current[g];
    }
    let x = crate::linalg::dense_solve_complex(&a, &b)?;
    let currents: Vec<Complex64> = (0..n).map(|i| x[(i, 0)]).collect();
    let field: Vec<Complex64> = (0..ng).map(|g| x[(n + g, 0)]).collect();
    let norm = system.group_current[0].norm_sqr();
    let r_eff = system
        .resistance
        .iter()
        .zip(&currents)
        .map(|(r, i)| r * i.norm_sqr())
        .sum::<f64>()
        / norm;
    let group_impedance = (0..ng)
        .map(|g| {
            (system.group_current[g].norm() > 0.0).then(|| field[g] / system.group_current[g])
        })
        .collect::<Vec<_>>();
    let group_inductance = group_impedance
        .iter()
        .map(|z| z.and_then(|z: Complex64| (omega > 0.0).then(|| z.im / omega)))
        .collect();
    Ok(ImpedancePoint {
        frequency,
        group_impedance,
        group_inductance,
        r_eff,
        l_eff: f64::NAN,
        field,
        currents,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceTable {
    pub frequencies: Vec<f64>,
    /// `[frequency][group]`, `None` for undriven groups.
    pub impedance: Vec<Vec<Option<Complex64>>>,
    pub inductance: Vec<Vec<Option<f64>>>,
    pub r_eff: Vec<f64>,
    pub l_eff: Vec<f64>,
}

impl ImpedanceTable {
    pub fn group_count(&self) -> usize {
        self.impedance.first().map_or(0, |r| r.len())
    }

    /// Effective resistance per frequency, Ω/m.
    pub fn resistance(&self) -> &[f64] {
        &self.r_eff
    }

    pub fn is_monotone_nondecreasing(&self, rel_tol: f64) -> bool {
        self.r_eff
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - rel_tol))
    }

    /// CSV with one row per frequency and driven group, plus a `total` row
    /// per frequency when more than one group exists.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,group,r_ohm_per_m,l_h_per_m\n");
        for (k, f) in self.frequencies.iter().enumerate() {
            for (g, z) in self.impedance[k].iter().enumerate() {
                if let (Some(z), Some(l)) = (z, self.inductance[k][g]) {
                    s.push_str(&format!("{:e},{},{:e},{:e}\n", f, g, z.re, l));
                }
            }
            if self.group_count() > 1 {
                s.push_str(&format!(
                    "{:e},total,{:e},{:e}\n",
                    f, self.r_eff[k], self.l_eff[k]
                ));
            }
        }
        s
    }
}

/// Evaluates every frequency with one shared factorization, in parallel.
/// Output order follows `frequencies`.
pub fn sweep_frequency(system: &FilamentSystem, frequencies: &[f64]) -> Result<ImpedanceTable> {
    if frequencies.len() < 2 {
        return Err(Error::Input("a frequency sweep needs at least 2 points".into()));
    }
    if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("sweep frequencies must be strictly increasing".into()));
    }
    let solver = FilamentSolver::new(system)?;
    let points: Vec<ImpedancePoint> = frequencies
        .par_iter()
        .map(|&f| {
            solver.solve(f).map(|(p, _)| p).map_err(|e| match e {
                Error::Solver(m) => Error::Solver(format!("at {f:e} Hz: {m}")),
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ImpedanceTable {
        frequencies: frequencies.to_vec(),
        impedance: points.iter().map(|p| p.group_impedance.clone()).collect(),
        inductance: points.iter().map(|p| p.group_inductance.clone()).collect(),
        r_eff: points.iter().map(|p| p.r_eff).collect(),
        l_eff: points.iter().map(|p| p.l_eff).collect(),
    })
}

/// `n` log-spaced points from `f_min` to `f_max`, optionally preceded by 0 Hz.
pub fn log_grid(f_min: f64, f_max: f64, n: usize, include_dc: bool) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    if include_dc {
        v.push(0.0);
    }
    if n == 1 {
        v.push(f_min);
        return v;
    }
    let (a, b) = (f_min.log10(), f_max.log10());
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        v.push(10f64.powf(a + t * (b - a)));
    }
    v
}

/// Default sweep: 40 log-spaced points from 1 MHz to 10 GHz plus DC.
pub fn default_frequency_grid() -> Vec<f64> {
    log_grid(1e6, 1e10, 40, true)
}

impl CurrentDensityMap {
    /// One row per filament: position, group and normalized density.
    pub fn to_csv(&self, system: &FilamentSystem) -> String {
        let mut s = String::from("x_m,y_m,group,abs_j,re_j,im_j\n");
        for (f, j) in system.filaments.iter().zip(&self.normalized) {
            s.push_str(&format!(
                "{:e},{:e},{},{:e},{:e},{:e}\n",
                f.x,
                f.y,
                f.group,
                j.norm(),
                j.re,
                j.im
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_cross_section, CrossSection, MaskOptions, PlacedShape, Primitive};

    const UM: f64 = 1e-6;
    const CU: f64 = 5.8e7;

    fn circle(d: f64, h: f64) -> FilamentSystem {
        let m = build_cross_section(&CrossSection::circle_diameter(d), &MaskOptions::new(h)).unwrap();
        discretize_filaments(&m, &[CU], DEFAULT_REFERENCE_RADIUS).unwrap()
    }

    fn pair(x: f64, h: f64) -> FilamentSystem {
        let c = |cx: f64, g| PlacedShape::new(Primitive::Circle { radius: 2.0 * UM }, [cx, 0.0], g);
        let cs = CrossSection::Composite(vec![c(-0.5 * x, 0), c(0.5 * x, 1)]);
        let m = build_cross_section(&cs, &MaskOptions::new(h)).unwrap();
        discretize_filaments(&m, &[CU, CU], DEFAULT_REFERENCE_RADIUS).unwrap()
    }

    #[test]
    fn single_cell_resistance() {
        let cs = CrossSection::Rectangle {
            width: 1.0 * UM,
            height: 1.0 * UM,
        };
        let m = build_cross_section(&cs, &MaskOptions::new(1.0 * UM)).unwrap();
        let s = discretize_filaments(&m, &[CU], DEFAULT_REFERENCE_RADIUS).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.resistance[0], 1.0 / (CU * 1e-12));
    }

    #[test]
    fn mutual_is_symmetric_and_ordered() {
        let s = circle(4.0 * UM, 0.5 * UM);
        let n = s.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(s.mutual[(i, j)], s.mutual[(j, i)]);
                if i != j {
                    assert!(s.mutual[(i, j)] > 0.0 && s.mutual[(i, j)] < s.mutual[(i, i)]);
                }
            }
        }
    }

    #[test]
    fn zero_conductivity_rejected() {
        let m = build_cross_section(&CrossSection::circle_diameter(4.0 * UM), &MaskOptions::new(0.5 * UM))
            .unwrap();
        assert!(matches!(
            discretize_filaments(&m, &[0.0], DEFAULT_REFERENCE_RADIUS),
            Err(Error::Physics(_))
        ));
    }

    #[test]
    fn dc_matches_parallel_resistance() {
        let s = circle(4.0 * UM, 0.25 * UM);
        let (p, map) = solve_impedance(&s, 0.0).unwrap();
        let r = s.dc_resistance(0);
        assert!((p.group_impedance[0].unwrap().re / r - 1.0).abs() < 1e-10);
        assert!((p.r_eff / r - 1.0).abs() < 1e-10);
        for j in &map.normalized {
            assert!((j - 1.0).norm() < 1e-8);
        }
    }

    #[test]
    fn spectral_and_direct_routes_agree() {
        let mut s = pair(6.0 * UM, 0.5 * UM);
        s.set_group_currents(&[Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.2)])
            .unwrap();
        let solver = FilamentSolver::new(&s).unwrap();
        for f in [0.0, 1e8, 5e9] {
            let (a, _) = solver.solve(f).unwrap();
            let b = solve_impedance_direct(&s, f).unwrap();
            for g in 0..2 {
                let (za, zb) = (a.group_impedance[g].unwrap(), b.group_impedance[g].unwrap());
                assert!((za - zb).norm() / zb.norm() < 1e-8, "{f} {za} {zb}");
            }
            assert!((a.r_eff / b.r_eff - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn power_balance() {
        let mut s = pair(6.0 * UM, 0.5 * UM);
        s.set_group_currents(&[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)])
            .unwrap();
        let (p, _) = solve_impedance(&s, 3e9).unwrap();
        let complex_power: Complex64 = p
            .field
            .iter()
            .zip(&s.group_current)
            .map(|(e, i)| e * i.conj())
            .sum();
        assert!((complex_power.re / p.r_eff - 1.0).abs() < 1e-9);
        let omega = 2.0 * PI * 3e9;
        assert!((complex_power.im / omega / p.l_eff - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dc_inductance_is_the_low_frequency_limit() {
        let s = circle(4.0 * UM, 0.5 * UM);
        let solver = FilamentSolver::new(&s).unwrap();
        let (p0, _) = solver.solve(0.0).unwrap();
        let (p1, _) = solver.solve(1.0).unwrap();
        let (l0, l1) = (p0.group_inductance[0].unwrap(), p1.group_inductance[0].unwrap());
        assert!((l0 / l1 - 1.0).abs() < 1e-8);
        assert!((p0.l_eff / l0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_radius_shifts_only_reactance() {
        let s = circle(6.0 * UM, 0.5 * UM);
        let t = s.with_reference_radius(1e-3);
        let f = 2e9;
        let (a, _) = solve_impedance(&s, f).unwrap();
        let (b, _) = solve_impedance(&t, f).unwrap();
        let (za, zb) = (a.group_impedance[0].unwrap(), b.group_impedance[0].unwrap());
        assert!((za.re / zb.re - 1.0).abs() < 1e-9);
        let omega = 2.0 * PI * f;
        let shift = MU0 / (2.0 * PI) * 10f64.ln();
        assert!(((zb.im - za.im) / omega / shift - 1.0).abs() < 1e-7);
    }

    #[test]
    fn surface_filaments_carry_more_current() {
        let s = circle(10.0 * UM, 0.5 * UM);
        let (_, map) = solve_impedance(&s, 10e9).unwrap();
        let mean = map.normalized.iter().map(|j| j.norm()).sum::<f64>() / s.len() as f64;
        let rmax = s.filaments.iter().map(|f| f.x.hypot(f.y)).fold(0.0, f64::max);
        for (f, j) in s.filaments.iter().zip(&map.normalized) {
            if f.x.hypot(f.y) > rmax - 0.5 * UM {
                assert!(j.norm() >= mean);
            }
        }
    }

    #[test]
    fn sweep_is_ordered_and_validated() {
        let s = circle(6.0 * UM, 0.5 * UM);
        let grid = log_grid(1e7, 1e10, 6, true);
        let t = sweep_frequency(&s, &grid).unwrap();
        assert_eq!(t.frequencies, grid);
        assert!(t.is_monotone_nondecreasing(0.0));
        assert!(sweep_frequency(&s, &[1e9]).is_err());
        assert!(sweep_frequency(&s, &[1e9, 1e8]).is_err());
        let csv = t.to_csv();
        assert!(csv.starts_with("frequency_hz,group,r_ohm_per_m,l_h_per_m\n"));
        assert_eq!(csv.lines().count(), 1 + grid.len());
    }

    #[test]
    fn all_zero_currents_is_a_solver_error() {
        let mut s = circle(4.0 * UM, 0.5 * UM);
        s.set_group_currents(&[Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(solve_impedance(&s, 1e9), Err(Error::Solver(_))));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_frequency_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e6).abs() < 1e-6 && (g[40] / 1e10 - 1.0).abs() < 1e-12);
    }
}
