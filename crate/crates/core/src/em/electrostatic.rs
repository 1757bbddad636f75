//! 2D Laplace solver for per-unit-length capacitance between conductors.
//!
//! Nodes sit on a tensor grid that is uniform around the conductors and grows
//! geometrically toward a grounded square box. Each edge carries the
//! finite-volume conductance `εr · dual_length / edge_length`. An edge from a
//! free node into a conductor is shortened to the exact boundary crossing, so
//! curved conductor surfaces need no staircase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pcg, PcgOptions, TripletBuilder};
use crate::model::{CrossSection, PlacedShape, Primitive};
use crate::EPS0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrostaticProblem {
    pub conductors: Vec<PlacedShape>,
    /// V, one per conductor.
    pub potentials: Vec<f64>,
    pub background_eps_r: f64,
    /// Regions with their own relative permittivity; later entries win.
    #[serde(default)]
    pub dielectrics: Vec<(PlacedShape, f64)>,
}

impl ElectrostaticProblem {
    /// Two round conductors of radius `a`, centers `d` apart, driven at ±½ V.
    pub fn two_wire(a: f64, d: f64, eps_r: f64) -> Self {
        let c = |x: f64| PlacedShape::new(Primitive::Circle { radius: a }, [x, 0.0], 0);
        Self {
            conductors: vec![c(-0.5 * d), c(0.5 * d)],
            potentials: vec![0.5, -0.5],
            background_eps_r: eps_r,
            dielectrics: Vec::new(),
        }
    }

    fn eps_at(&self, x: f64, y: f64) -> f64 {
        self.dielectrics
            .iter()
            .rev()
            .find(|(s, _)| s.contains(x, y))
            .map_or(self.background_eps_r, |(_, e)| *e)
    }

    fn scale(&self) -> ([f64; 2], f64, f64) {
        let mut b = [f64::MAX, f64::MIN, f64::MAX, f64::MIN];
        for c in &self.conductors {
            let cb = c.bbox();
            b[0] = b[0].min(cb[0]);
            b[1] = b[1].max(cb[1]);
            b[2] = b[2].min(cb[2]);
            b[3] = b[3].max(cb[3]);
        }
        let center = [0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3])];
        let half = 0.5 * (b[1] - b[0]).max(b[3] - b[2]);
        let mut sep: f64 = 0.0;
        for (i, a) in self.conductors.iter().enumerate() {
            for c in &self.conductors[..i] {
                sep = sep.max((a.center[0] - c.center[0]).hypot(a.center[1] - c.center[1]));
            }
        }
        if sep == 0.0 {
            sep = 2.0 * half;
        }
        (center, half, sep)
    }

    fn validate(&self) -> Result<()> {
        if self.conductors.is_empty() {
            return Err(Error::Geometry("electrostatic problem has no conductors".into()));
        }
        if self.potentials.len() != self.conductors.len() {
            return Err(Error::Input(format!(
                "{} conductors but {} potentials",
                self.conductors.len(),
                self.potentials.len()
            )));
        }
        if !(self.background_eps_r > 0.0) || self.dielectrics.iter().any(|(_, e)| !(*e > 0.0)) {
            return Err(Error::Input("relative permittivity must be > 0".into()));
        }
        let parts: Vec<PlacedShape> = self
            .conductors
            .iter()
            .enumerate()
            .map(|(k, c)| PlacedShape { group: k, ..c.clone() })
            .collect();
        CrossSection::Composite(parts).validate()?;
        for (i, a) in self.conductors.iter().enumerate() {
            for b in &self.conductors[..i] {
                if let (Primitive::Circle { radius: ra }, Primitive::Circle { radius: rb }) =
                    (&a.primitive, &b.primitive)
                {
                    let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                    if d <= ra + rb {
                        return Err(Error::Geometry("conductors touch".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrostaticOptions {
    /// Nodes per axis (rounded up to odd).
    pub nodes: usize,
    /// Box side as a multiple of the largest conductor separation.
    pub box_factor: f64,
    /// Share of nodes in the uniform core.
    pub core_fraction: f64,
    pub rel_tol: f64,
}

impl Default for ElectrostaticOptions {
    fn default() -> Self {
        Self {
            nodes: 401,
            box_factor: 40.0,
            core_fraction: 0.8,
            rel_tol: 1e-12,
        }
    }
}

const FREE: i32 = -1;
const BOX: i32 = -2;

#[derive(Debug, Clone)]
pub struct PotentialField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// V at node `iy * nx + ix`.
    pub potential: Vec<f64>,
    /// Conductor index per node, or -1 (free) / -2 (box).
    pub label: Vec<i32>,
    /// εr-weighted conductance of the edge from `(ix, iy)` to `(ix + 1, iy)`.
    pub gx: Vec<f64>,
    /// εr-weighted conductance of the edge from `(ix, iy)` to `(ix, iy + 1)`.
    pub gy: Vec<f64>,
    pub conductor_potentials: Vec<f64>,
    pub conductor_bbox: Vec<[f64; 4]>,
    pub iterations: usize,
    /// ‖b − A·u‖∞ / ‖b‖∞ of the final solve.
    pub residual: f64,
}

fn axis(nodes: usize, center: f64, core: f64, outer: f64, frac: f64) -> Vec<f64> {
    let mut ncore = ((nodes - 1) as f64 * frac).round() as usize;
    ncore -= ncore % 2;
    let ncore = ncore.max(2);
    let h = 2.0 * core / ncore as f64;
    let nout = (nodes - 1 - ncore) / 2;
    let len = outer - core;
    let mut steps = Vec::with_capacity(nout);
    if nout > 0 {
        if h * nout as f64 >= len {
            steps = vec![len / nout as f64; nout];
        } else {
            let total = |r: f64| h * r * (r.powi(nout as i32) - 1.0) / (r - 1.0);
            let (mut lo, mut hi) = (1.0 + 1e-12, 4.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if total(mid) > len {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            let mut s = h;
            for _ in 0..nout {
                s *= r;
                steps.push(s);
            }
        }
    }
    let mut out = Vec::with_capacity(nout);
    let mut p = core;
    for (k, s) in steps.iter().enumerate() {
        p += s;
        out.push(if k + 1 == nout { outer } else { p });
    }
    let mut v: Vec<f64> = out.iter().rev().map(|d| center - d).collect();
    v.extend((0..=ncore).map(|k| center - core + k as f64 * h));
    v.extend(out.iter().map(|d| center + d));
    v
}

/// Fraction along `p → q` at which the conductor boundary is crossed.
fn crossing(shape: &PlacedShape, p: [f64; 2], q: [f64; 2]) -> f64 {
    let t = match &shape.primitive {
        Primitive::Circle { radius } => {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let (ox, oy) = (p[0] - shape.center[0], p[1] - shape.center[1]);
            let a = dx * dx + dy * dy;
            let b = 2.0 * (dx * ox + dy * oy);
            let c = ox * ox + oy * oy - radius * radius;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            (-b - disc.sqrt()) / (2.0 * a)
        }
        _ => {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                let x = [p[0] + m * (q[0] - p[0]), p[1] + m * (q[1] - p[1])];
                if shape.contains(x[0], x[1]) {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            hi
        }
    };
    t.clamp(1e-3, 1.0)
}

pub fn solve_electrostatic(
    problem: &ElectrostaticProblem,
    opts: &ElectrostaticOptions,
) -> Result<PotentialField> {
    problem.validate()?;
    let nodes = (opts.nodes.max(11)) | 1;
    let (center, half, sep) = problem.scale();
    let core = half + 0.5 * sep;
    let outer = (0.5 * opts.box_factor * sep).max(2.0 * core);
    let x = axis(nodes, center[0], core, outer, opts.core_fraction);
    let y = axis(nodes, center[1], core, outer, opts.core_fraction);
    let (nx, ny) = (x.len(), y.len());
    let id = |ix: usize, iy: usize| iy * nx + ix;

    let mut label = vec![FREE; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let k = id(ix, iy);
            if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                label[k] = BOX;
                continue;
            }
            for (c, shape) in problem.conductors.iter().enumerate() {
                if shape.contains(x[ix], y[iy]) {
                    label[k] = c as i32;
                }
            }
        }
    }
    for (c, shape) in problem.conductors.iter().enumerate() {
        if !label.contains(&(c as i32)) {
            return Err(Error::Geometry(format!(
                "conductor {c} at ({:e}, {:e}) holds no grid node; refine the grid",
                shape.center[0], shape.center[1]
            )));
        }
    }

    let edge = |p: [f64; 2], q: [f64; 2], dual: f64, len: f64, lp: i32, lq: i32| -> Result<f64> {
        let mut g = dual / len;
        match (lp, lq) {
            (a, b) if a >= 0 && b >= 0 && a != b => Err(Error::Geometry(format!(
                "conductors {a} and {b} touch at grid resolution"
            ))),
            (FREE, c) if c >= 0 => {
                let t = crossing(&problem.conductors[c as usize], p, q);
                let m = [p[0] + 0.5 * t * (q[0] - p[0]), p[1] + 0.5 * t * (q[1] - p[1])];
                g *= problem.eps_at(m[0], m[1]) / t;
                Ok(g)
            }
            (c, FREE) if c >= 0 => {
                let t = crossing(&problem.conductors[c as usize], q, p);
                let m = [q[0] + 0.5 * t * (p[0] - q[0]), q[1] + 0.5 * t * (p[1] - q[1])];
                g *= problem.eps_at(m[0], m[1]) / t;
                Ok(g)
            }
            _ => Ok(g * problem.eps_at(0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))),
        }
    };
    let dual = |v: &[f64], i: usize| {
        let lo = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
        let hi = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
        0.5 * (lo + hi)
    };
    let mut gx = vec![0.0; nx * ny];
    let mut gy = vec![0.0; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let k = id(ix, iy);
            if ix + 1 < nx {
                gx[k] = edge(
                    [x[ix], y[iy]],
                    [x[ix + 1], y[iy]],
                    dual(&y, iy),
                    x[ix + 1] - x[ix],
                    label[k],
                    label[id(ix + 1, iy)],
                )?;
            }
            if iy + 1 < ny {
                gy[k] = edge(
                    [x[ix], y[iy]],
                    [x[ix], y[iy + 1]],
                    dual(&x, ix),
                    y[iy + 1] - y[iy],
                    label[k],
                    label[id(ix, iy + 1)],
                )?;
            }
        }
    }

    let fixed = |l: i32| -> Option<f64> {
        match l {
            FREE => None,
            BOX => Some(0.0),
            c => Some(problem.potentials[c as usize]),
        }
    };
    let mut unknown = vec![usize::MAX; nx * ny];
    let mut n = 0;
    for k in 0..nx * ny {
        if label[k] == FREE {
            unknown[k] = n;
            n += 1;
        }
    }
    let mut tb = TripletBuilder::with_capacity(n, 5 * n);
    let mut b = vec![0.0; n];
    let mut couple = |p: usize, q: usize, g: f64, tb: &mut TripletBuilder| match (
        fixed(label[p]),
        fixed(label[q]),
    ) {
        (None, None) => tb.add_conductance(unknown[p], unknown[q], g),
        (None, Some(v)) => {
            tb.add(unknown[p], unknown[p], g);
            b[unknown[p]] += g * v;
        }
        (Some(v), None) => {
            tb.add(unknown[q], unknown[q], g);
            b[unknown[q]] += g * v;
        }
        _ => {}
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let k = id(ix, iy);
            if ix + 1 < nx {
                couple(k, id(ix + 1, iy), gx[k], &mut tb);
            }
            if iy + 1 < ny {
                couple(k, id(ix, iy + 1), gy[k], &mut tb);
            }
        }
    }
    let a = tb.build();
    let mut u = vec![0.0; n];
    let stats = pcg(
        &a,
        &b,
        &mut u,
        &PcgOptions {
            rel_tol: opts.rel_tol,
            ..PcgOptions::default()
        },
    )?;
    let au = a.mul_vec(&u);
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rmax = au
        .iter()
        .zip(&b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let residual = if bmax > 0.0 { rmax / bmax } else { rmax };

    let potential = (0..nx * ny)
        .map(|k| fixed(label[k]).unwrap_or_else(|| u[unknown[k]]))
        .collect();
    Ok(PotentialField {
        x,
        y,
        potential,
        label,
        gx,
        gy,
        conductor_potentials: problem.potentials.clone(),
        conductor_bbox: problem.conductors.iter().map(|c| c.bbox()).collect(),
        iterations: stats.iterations,
        residual,
    })
}

impl PotentialField {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let nx = self.nx();
        let ny = self.ny();
        (0..ny).flat_map(move |iy| {
            (0..nx).flat_map(move |ix| {
                let k = iy * nx + ix;
                let ex = (ix + 1 < nx).then(|| (k, k + 1, self.gx[k]));
                let ey = (iy + 1 < ny).then(|| (k, k + nx, self.gy[k]));
                ex.into_iter().chain(ey)
            })
        })
    }

    /// Charge per unit length on `conductor`, C/m, from the flux through the
    /// edges that enter it.
    pub fn conductor_charge(&self, conductor: usize) -> f64 {
        let c = conductor as i32;
        let mut q = 0.0;
        for (p, r, g) in self.edges() {
            if self.label[p] == c && self.label[r] != c {
                q += g * (self.potential[p] - self.potential[r]);
            } else if self.label[r] == c && self.label[p] != c {
                q += g * (self.potential[r] - self.potential[p]);
            }
        }
        EPS0 * q
    }

    /// Charge inside the node rectangle `[x0, x1] × [y0, y1]` from the flux
    /// across its boundary, C/m.
    pub fn contour_charge(&self, rect: [f64; 4]) -> Result<f64> {
        let (nx, ny) = (self.nx(), self.ny());
        let inside = |k: usize| {
            let (ix, iy) = (k % nx, k / nx);
            self.x[ix] >= rect[0] && self.x[ix] <= rect[1] && self.y[iy] >= rect[2] && self.y[iy] <= rect[3]
        };
        if (0..nx * ny).any(|k| inside(k) && self.label[k] == BOX) {
            return Err(Error::Geometry("contour extends to the outer box".into()));
        }
        let mut q = 0.0;
        for (p, r, g) in self.edges() {
            let (ip, ir) = (inside(p), inside(r));
            if ip == ir {
                continue;
            }
            if self.label[p] >= 0 || self.label[r] >= 0 {
                return Err(Error::Geometry("integration contour intersects a conductor".into()));
            }
            let (a, b) = if ip { (p, r) } else { (r, p) };
            q += g * (self.potential[a] - self.potential[b]);
        }
        Ok(EPS0 * q)
    }

    /// Smallest contour around `conductor` grown by `margin` grid nodes in the
    /// uniform core.
    pub fn default_contour(&self, conductor: usize, margin: usize) -> [f64; 4] {
        let b = self.conductor_bbox[conductor];
        let h = self.x.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
        let m = (margin as f64 + 0.5) * h;
        [b[0] - m, b[1] + m, b[2] - m, b[3] + m]
    }
}

/// `C' = Q_A / (V_A − V_B)` for conductors A = 0 and B = 1, with `Q_A` from a
/// Gauss contour two cells outside conductor A.
pub fn extract_capacitance(field: &PotentialField) -> Result<f64> {
    extract_capacitance_with_contour(field, field.default_contour(0, 2))
}

pub fn extract_capacitance_with_contour(field: &PotentialField, rect: [f64; 4]) -> Result<f64> {
    if field.conductor_potentials.len() < 2 {
        return Err(Error::Input("capacitance extraction needs two conductors".into()));
    }
    let dv = field.conductor_potentials[0] - field.conductor_potentials[1];
    if dv == 0.0 {
        return Err(Error::Input("conductors A and B are at the same potential".into()));
    }
    Ok(field.contour_charge(rect)? / dv)
}

/// Maxwell capacitance matrix: column `j` holds the charges with conductor `j`
/// at 1 V and all others grounded.
pub fn capacitance_matrix(
    problem: &ElectrostaticProblem,
    opts: &ElectrostaticOptions,
) -> Result<Vec<Vec<f64>>> {
    let n = problem.conductors.len();
    let mut c = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut p = problem.clone();
        p.potentials = (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
        let field = solve_electrostatic(&p, opts)?;
        for (i, row) in c.iter_mut().enumerate() {
            row[j] = field.conductor_charge(i);
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const UM: f64 = 1e-6;

    fn two_wire_exact(a: f64, d: f64) -> f64 {
        PI * EPS0 / (d / (2.0 * a)).acosh()
    }

    fn coarse() -> ElectrostaticOptions {
        ElectrostaticOptions {
            nodes: 151,
            ..Default::default()
        }
    }

    #[test]
    fn axis_is_monotone_and_bounded() {
        let v = axis(101, 1.0, 2.0, 40.0, 0.8);
        assert_eq!(v.len(), 101);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[0] + 39.0).abs() < 1e-12 && (v[100] - 41.0).abs() < 1e-12);
    }

    #[test]
    fn maximum_principle() {
        let mut p = ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 1.0);
        p.conductors.truncate(1);
        p.potentials = vec![1.0];
        let f = solve_electrostatic(&p, &coarse()).unwrap();
        assert!(f.potential.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn two_wire_within_five_percent() {
        let (a, d) = (5.0 * UM, 20.0 * UM);
        let f = solve_electrostatic(&ElectrostaticProblem::two_wire(a, d, 1.0), &coarse()).unwrap();
        let c = extract_capacitance(&f).unwrap();
        assert!((c / two_wire_exact(a, d) - 1.0).abs() < 0.05, "{c}");
        assert!(f.residual < 1e-8);
    }

    #[test]
    fn contour_independence_and_charge_agreement() {
        let f = solve_electrostatic(&ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 1.0), &coarse())
            .unwrap();
        let c1 = extract_capacitance_with_contour(&f, f.default_contour(0, 1)).unwrap();
        let c2 = extract_capacitance_with_contour(&f, f.default_contour(0, 4)).unwrap();
        let direct = f.conductor_charge(0);
        assert!((c1 / c2 - 1.0).abs() < 0.01);
        assert!((c1 / direct - 1.0).abs() < 1e-6);
        // a contour reaching conductor B
        let bad = [-20.0 * UM, 8.0 * UM, -10.0 * UM, 10.0 * UM];
        assert!(matches!(extract_capacitance_with_contour(&f, bad), Err(Error::Geometry(_))));
    }

    #[test]
    fn permittivity_scales_capacitance() {
        let o = coarse();
        let c1 = extract_capacitance(
            &solve_electrostatic(&ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 1.0), &o).unwrap(),
        )
        .unwrap();
        let c2 = extract_capacitance(
            &solve_electrostatic(&ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 2.0), &o).unwrap(),
        )
        .unwrap();
        assert!((c2 / c1 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn swapping_drive_keeps_capacitance() {
        let o = coarse();
        let mut p = ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 1.0);
        let c1 = extract_capacitance(&solve_electrostatic(&p, &o).unwrap()).unwrap();
        p.potentials = vec![-0.5, 0.5];
        let c2 = extract_capacitance(&solve_electrostatic(&p, &o).unwrap()).unwrap();
        assert!((c1 / c2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maxwell_matrix_is_symmetric() {
        let p = ElectrostaticProblem::two_wire(5.0 * UM, 20.0 * UM, 1.0);
        let c = capacitance_matrix(&p, &coarse()).unwrap();
        assert!((c[0][1] / c[1][0] - 1.0).abs() < 0.01);
        assert!(c[0][0] > 0.0 && c[0][1] < 0.0);
    }

    #[test]
    fn touching_conductors_rejected() {
        let p = ElectrostaticProblem::two_wire(5.0 * UM, 10.0 * UM, 1.0);
        assert!(matches!(solve_electrostatic(&p, &coarse()), Err(Error::Geometry(_))));
    }
}
