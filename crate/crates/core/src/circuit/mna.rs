//! Modified nodal analysis: DC operating point, AC sweep and trapezoidal
//! transient.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::netlist::{ElementKind, Netlist, GROUND};
use crate::error::{Error, Result};
use crate::mor::RcSystem;

/// Dense MNA size limit.
pub const MAX_UNKNOWNS: usize = 4000;

/// Unknown numbering: node `k ≥ 1` is row `k − 1`, then branch variables.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub nodes: usize,
    /// First branch row of each element, if it has any.
    pub branch: Vec<Option<usize>>,
    pub dim: usize,
}

impl Layout {
    pub fn new(net: &Netlist) -> Result<Self> {
        let nodes = net.node_count() - 1;
        let mut next = nodes;
        let mut branch = Vec::with_capacity(net.elements().len());
        for e in net.elements() {
            let k = match &e.kind {
                ElementKind::VSource(_) | ElementKind::Inductor { .. } | ElementKind::Vcvs { .. } => 1,
                ElementKind::TLine(_) => 2,
                ElementKind::Block { model, .. } => model.order() + model.outputs(),
                _ => 0,
            };
            branch.push((k > 0).then_some(next));
            next += k;
        }
        if next > MAX_UNKNOWNS {
            return Err(Error::Resource(format!(
                "{next} MNA unknowns exceed the dense limit of {MAX_UNKNOWNS}"
            )));
        }
        Ok(Self {
            nodes,
            branch,
            dim: next,
        })
    }

    fn row(&self, node: usize) -> Option<usize> {
        (node != GROUND).then(|| node - 1)
    }
}

/// Adds `v` at (row, col) of node-or-branch indices, skipping ground.
struct Stamp<'a, T> {
    a: &'a mut DMatrix<T>,
}

impl<T: nalgebra::Scalar + Copy + std::ops::AddAssign + std::ops::Neg<Output = T>> Stamp<'_, T> {
    fn at(&mut self, r: Option<usize>, c: Option<usize>, v: T) {
        if let (Some(r), Some(c)) = (r, c) {
            self.a[(r, c)] += v;
        }
    }

    fn conductance(&mut self, lay: &Layout, n1: usize, n2: usize, g: T) {
        let (a, b) = (lay.row(n1), lay.row(n2));
        self.at(a, a, g);
        self.at(b, b, g);
        self.at(a, b, -g);
        self.at(b, a, -g);
    }

    /// Branch current `k` leaves `n1` and enters `n2`.
    fn incidence(&mut self, lay: &Layout, n1: usize, n2: usize, k: usize, one: T) {
        self.at(lay.row(n1), Some(k), one);
        self.at(lay.row(n2), Some(k), -one);
    }

    /// Row `k` gets `s·(v(n1) − v(n2))`.
    fn voltage_row(&mut self, lay: &Layout, k: usize, n1: usize, n2: usize, s: T) {
        self.at(Some(k), lay.row(n1), s);
        self.at(Some(k), lay.row(n2), -s);
    }
}

/// Temperature-dependent resistance of an etherm device.
pub fn etherm_resistance(name: &str, r0: f64, t0: f64, alpha: f64, t: f64) -> Result<f64> {
    let r = r0 * (1.0 + alpha * (t - t0));
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Physics(format!(
            "device `{name}` resistance {r:e} Ω at {t:.3} K is not positive"
        )));
    }
    Ok(r)
}

/// Frequency-independent part `(G, C)`. `temps` gives etherm device
/// temperatures in device order; `None` uses each device's `t0`.
pub(crate) fn assemble_static(
    net: &Netlist,
    lay: &Layout,
    temps: Option<&[f64]>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut g = DMatrix::zeros(lay.dim, lay.dim);
    let mut c = DMatrix::zeros(lay.dim, lay.dim);
    let mut device = 0;
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        let n = &e.nodes;
        let mut sg = Stamp { a: &mut g };
        match &e.kind {
            ElementKind::Resistor { r } => sg.conductance(lay, n[0], n[1], 1.0 / r),
            ElementKind::Etherm { r0, t0, alpha, .. } => {
                let t = temps.map_or(*t0, |t| t[device]);
                device += 1;
                let r = etherm_resistance(&e.name, *r0, *t0, *alpha, t)?;
                sg.conductance(lay, n[0], n[1], 1.0 / r);
            }
            ElementKind::Capacitor { c: cap, .. } => Stamp { a: &mut c }.conductance(lay, n[0], n[1], *cap),
            ElementKind::Inductor { l, .. } => {
                let k = br.unwrap();
                sg.incidence(lay, n[0], n[1], k, 1.0);
                sg.voltage_row(lay, k, n[0], n[1], 1.0);
                c[(k, k)] -= l;
            }
            ElementKind::VSource(_) => {
                let k = br.unwrap();
                sg.incidence(lay, n[0], n[1], k, 1.0);
                sg.voltage_row(lay, k, n[0], n[1], 1.0);
            }
            ElementKind::ISource(_) => {}
            ElementKind::Vccs { gm } => {
                let (p, m) = (lay.row(n[0]), lay.row(n[1]));
                let (cp, cm) = (lay.row(n[2]), lay.row(n[3]));
                sg.at(p, cp, *gm);
                sg.at(p, cm, -gm);
                sg.at(m, cp, -gm);
                sg.at(m, cm, *gm);
            }
            ElementKind::Vcvs { gain } => {
                let k = br.unwrap();
                sg.incidence(lay, n[0], n[1], k, 1.0);
                sg.voltage_row(lay, k, n[0], n[1], 1.0);
                sg.voltage_row(lay, k, n[2], n[3], -gain);
            }
            ElementKind::Cccs { control, gain } => {
                let ci = net
                    .elements()
                    .iter()
                    .position(|x| x.name.eq_ignore_ascii_case(control))
                    .and_then(|i| lay.branch[i])
                    .ok_or_else(|| Error::Reference(format!("`{}`: no branch current for `{control}`", e.name)))?;
                sg.incidence(lay, n[0], n[1], ci, *gain);
            }
            ElementKind::Block { model, .. } => {
                let z0 = br.unwrap();
                let q = model.order();
                let i0 = z0 + q;
                for r in 0..q {
                    for s in 0..q {
                        g[(z0 + r, z0 + s)] += model.g[(r, s)];
                        c[(z0 + r, z0 + s)] += model.c[(r, s)];
                    }
                    for p in 0..model.inputs() {
                        g[(z0 + r, i0 + p)] -= model.b[(r, p)];
                    }
                }
                for (p, &node) in n.iter().enumerate() {
                    let mut sg = Stamp { a: &mut g };
                    sg.incidence(lay, node, GROUND, i0 + p, 1.0);
                    sg.voltage_row(lay, i0 + p, node, GROUND, 1.0);
                    for s in 0..q {
                        g[(i0 + p, z0 + s)] -= model.l[(s, p)];
                    }
                }
            }
            ElementKind::Mutual { l1, l2, k } => {
                let ind = |name: &str| {
                    net.elements()
                        .iter()
                        .position(|x| x.name.eq_ignore_ascii_case(name))
                        .and_then(|i| match net.elements()[i].kind {
                            ElementKind::Inductor { l, .. } => Some((lay.branch[i].unwrap(), l)),
                            _ => None,
                        })
                        .ok_or_else(|| Error::Reference(format!("`{}`: `{name}` is not an inductor", e.name)))
                };
                let ((b1, la), (b2, lb)) = (ind(l1)?, ind(l2)?);
                let m = k * (la * lb).sqrt();
                c[(b1, b2)] -= m;
                c[(b2, b1)] -= m;
            }
            ElementKind::FreqResistor { .. } | ElementKind::TLine(_) => {}
        }
    }
    Ok((g, c))
}

/// ABCD of a uniform line: `[[cosh x, Z'l·sh], [Y'l·sh, cosh x]]`,
/// `x = γl`, `sh = sinh(x)/x`.
pub fn line_abcd(rpul: f64, lpul: f64, gpul: f64, cpul: f64, length: f64, f: f64) -> [[Complex64; 2]; 2] {
    let w = 2.0 * std::f64::consts::PI * f;
    let z = Complex64::new(rpul, w * lpul) * length;
    let y = Complex64::new(gpul, w * cpul) * length;
    let x = (z * y).sqrt();
    let sh = if x.norm() < 1e-8 {
        Complex64::new(1.0, 0.0) + x * x / 6.0
    } else {
        x.sinh() / x
    };
    let ch = x.cosh();
    [[ch, z * sh], [y * sh, ch]]
}

/// Frequency-dependent stamps; `f = None` is DC (tables use their first entry).
pub(crate) fn stamp_dynamic(
    net: &Netlist,
    lay: &Layout,
    f: Option<f64>,
    a: &mut DMatrix<Complex64>,
) -> Result<()> {
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        let n = &e.nodes;
        let mut s = Stamp { a: &mut *a };
        match &e.kind {
            ElementKind::FreqResistor { table } => {
                let r = match f {
                    None => table.dc_value(),
                    Some(f) => table.eval(&e.name, f)?,
                };
                s.conductance(lay, n[0], n[1], Complex64::new(1.0 / r, 0.0));
            }
            ElementKind::TLine(p) => {
                let [[aa, bb], [cc, dd]] = line_abcd(p.rpul, p.lpul, p.gpul, p.cpul, p.length, f.unwrap_or(0.0));
                let one = Complex64::new(1.0, 0.0);
                let (k1, k2) = (br.unwrap(), br.unwrap() + 1);
                // I1 enters the line at n1; I2 leaves it at n2
                s.incidence(lay, n[0], n[1], k1, one);
                s.incidence(lay, n[3], n[2], k2, one);
                // V1 = A V2 + B I2
                s.voltage_row(lay, k1, n[0], n[1], one);
                s.voltage_row(lay, k1, n[2], n[3], -aa);
                s.at(Some(k1), Some(k2), -bb);
                // I1 = C V2 + D I2
                s.at(Some(k2), Some(k1), one);
                s.voltage_row(lay, k2, n[2], n[3], -cc);
                s.at(Some(k2), Some(k2), -dd);
            }
            _ => {}
        }
    }
    Ok(())
}

fn rhs_real(net: &Netlist, lay: &Layout, t: Option<f64>) -> DVector<f64> {
    let mut b = DVector::zeros(lay.dim);
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        let val = |s: &super::netlist::Source| t.map_or(s.dc, |t| s.at(t));
        match &e.kind {
            ElementKind::VSource(s) => b[br.unwrap()] += val(s),
            ElementKind::ISource(s) => {
                let v = val(s);
                if let Some(r) = lay.row(e.nodes[0]) {
                    b[r] -= v;
                }
                if let Some(r) = lay.row(e.nodes[1]) {
                    b[r] += v;
                }
            }
            ElementKind::Block { model, .. } => {
                let i0 = br.unwrap() + model.order();
                for (p, off) in model.output_offset.iter().enumerate() {
                    b[i0 + p] += off;
                }
            }
            _ => {}
        }
    }
    b
}

fn rhs_ac(net: &Netlist, lay: &Layout) -> DVector<Complex64> {
    let mut b = DVector::zeros(lay.dim);
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        match &e.kind {
            ElementKind::VSource(s) => b[br.unwrap()] += s.ac,
            ElementKind::ISource(s) => {
                if let Some(r) = lay.row(e.nodes[0]) {
                    b[r] -= s.ac;
                }
                if let Some(r) = lay.row(e.nodes[1]) {
                    b[r] += s.ac;
                }
            }
            _ => {}
        }
    }
    b
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Names the first node with no conducting path to ground.
fn floating_node(net: &Netlist, ac: bool) -> Option<String> {
    let mut parent: Vec<usize> = (0..net.node_count()).collect();
    let mut join = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for e in net.elements() {
        let n = &e.nodes;
        match &e.kind {
            ElementKind::Resistor { .. }
            | ElementKind::Etherm { .. }
            | ElementKind::FreqResistor { .. }
            | ElementKind::Inductor { .. }
            | ElementKind::VSource(_)
            | ElementKind::Vcvs { .. } => join(n[0], n[1]),
            ElementKind::Capacitor { .. } if ac => join(n[0], n[1]),
            ElementKind::TLine(p) => {
                join(n[0], n[2]);
                join(n[1], n[3]);
                if p.gpul > 0.0 || (ac && p.cpul > 0.0) {
                    join(n[0], n[1]);
                }
            }
            ElementKind::Block { .. } => n.iter().for_each(|&x| join(x, GROUND)),
            _ => {}
        }
    }
    (1..net.node_count())
        .find(|&i| find(&mut parent, i) != find(&mut parent, GROUND))
        .map(|i| net.node_names()[i].clone())
}

fn singular(net: &Netlist, ac: bool) -> Error {
    match floating_node(net, ac) {
        Some(n) => Error::Topology(format!("node `{n}` has no DC path to ground")),
        None => Error::Topology("singular MNA matrix (loop of voltage sources or inductors?)".into()),
    }
}

/// Largest KCL-row residual relative to the source scale.
fn kcl<T: nalgebra::ComplexField<RealField = f64> + Copy>(
    a: &DMatrix<T>,
    x: &DVector<T>,
    b: &DVector<T>,
    nodes: usize,
) -> f64 {
    let r = a * x - b;
    let worst = r.iter().take(nodes).fold(0.0f64, |m, v| m.max(v.modulus()));
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

fn node_voltages<T: Copy + num_traits::Zero>(x: &DVector<T>, lay: &Layout) -> Vec<T> {
    std::iter::once(T::zero()).chain(x.iter().take(lay.nodes).copied()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DcResult {
    pub node_names: Vec<String>,
    /// Indexed like the netlist nodes; ground is entry 0.
    pub voltages: Vec<f64>,
    /// Current through each two-terminal element, from its first node to its second.
    pub currents: BTreeMap<String, f64>,
    pub kcl_residual: f64,
}

impl DcResult {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        self.node_names.iter().position(|n| n == node).map(|i| self.voltages[i])
    }
}

/// Solves the operating point; `temps` as for etherm devices.
pub fn dc_solve_at(net: &Netlist, temps: Option<&[f64]>) -> Result<DcResult> {
    let lay = Layout::new(net)?;
    let (g, _) = assemble_static(net, &lay, temps)?;
    let mut dynamic = DMatrix::zeros(lay.dim, lay.dim);
    stamp_dynamic(net, &lay, None, &mut dynamic)?;
    let a = g + dynamic.map(|z| z.re);
    let b = rhs_real(net, &lay, None);
    let x = a.clone().lu().solve(&b).filter(|x| x.iter().all(|v| v.is_finite()));
    let x = x.ok_or_else(|| singular(net, false))?;
    let residual = kcl(&a, &x, &b, lay.nodes);
    let voltages = node_voltages(&x, &lay);
    let currents = element_currents(net, &lay, &voltages, &x, temps)?;
    Ok(DcResult {
        node_names: net.node_names().to_vec(),
        voltages,
        currents,
        kcl_residual: residual,
    })
}

pub fn dc_solve(net: &Netlist) -> Result<DcResult> {
    dc_solve_at(net, None)
}

fn element_currents(
    net: &Netlist,
    lay: &Layout,
    v: &[f64],
    x: &DVector<f64>,
    temps: Option<&[f64]>,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let mut device = 0;
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        let n = &e.nodes;
        let drop = || v[n[0]] - v[n[1]];
        let i = match &e.kind {
            ElementKind::Resistor { r } => drop() / r,
            ElementKind::FreqResistor { table } => drop() / table.dc_value(),
            ElementKind::Etherm { r0, t0, alpha, .. } => {
                let t = temps.map_or(*t0, |t| t[device]);
                device += 1;
                drop() / etherm_resistance(&e.name, *r0, *t0, *alpha, t)?
            }
            ElementKind::Capacitor { .. } => 0.0,
            ElementKind::Inductor { .. } | ElementKind::VSource(_) | ElementKind::Vcvs { .. } => x[br.unwrap()],
            ElementKind::ISource(s) => s.dc,
            ElementKind::Vccs { gm } => gm * (v[n[2]] - v[n[3]]),
            ElementKind::Cccs { control, gain } => {
                let k = net
                    .elements()
                    .iter()
                    .position(|x| x.name.eq_ignore_ascii_case(control))
                    .and_then(|i| lay.branch[i])
                    .unwrap_or(0);
                gain * x[k]
            }
            ElementKind::TLine(_) | ElementKind::Block { .. } | ElementKind::Mutual { .. } => continue,
        };
        out.insert(e.name.clone(), i);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct AcResult {
    pub frequencies: Vec<f64>,
    pub node_names: Vec<String>,
    /// `[frequency][node]`, ground included.
    #[serde(skip)]
    pub voltages: Vec<Vec<Complex64>>,
    pub kcl_residual: f64,
}

impl AcResult {
    pub fn voltage(&self, node: &str) -> Option<Vec<Complex64>> {
        let i = self.node_names.iter().position(|n| n == node)?;
        Some(self.voltages.iter().map(|v| v[i]).collect())
    }
}

/// Independent complex solves per frequency, in parallel; output order
/// follows `frequencies`.
pub fn ac_sweep(net: &Netlist, frequencies: &[f64]) -> Result<AcResult> {
    if frequencies.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::Input("AC frequencies must be finite and >= 0".into()));
    }
    if frequencies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input("AC frequency grid must be sorted".into()));
    }
    let lay = Layout::new(net)?;
    let (g, c) = assemble_static(net, &lay, None)?;
    let b = rhs_ac(net, &lay);
    let points: Vec<Result<(Vec<Complex64>, f64)>> = frequencies
        .par_iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f;
            let mut a = DMatrix::from_fn(lay.dim, lay.dim, |i, j| Complex64::new(g[(i, j)], w * c[(i, j)]));
            stamp_dynamic(net, &lay, Some(f), &mut a)?;
            let x = a
                .clone()
                .lu()
                .solve(&b)
                .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
                .ok_or_else(|| singular(net, true))?;
            let res = kcl(&a, &x, &b, lay.nodes);
            Ok((node_voltages(&x, &lay), res))
        })
        .collect();
    let mut voltages = Vec::with_capacity(points.len());
    let mut worst = 0.0f64;
    for p in points {
        let (v, r) = p?;
        voltages.push(v);
        worst = worst.max(r);
    }
    Ok(AcResult {
        frequencies: frequencies.to_vec(),
        node_names: net.node_names().to_vec(),
        voltages,
        kcl_residual: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initial {
    /// Start from the DC operating point at t = 0.
    #[default]
    OperatingPoint,
    /// Capacitor voltages and inductor currents from their `ic` values
    /// (zero when absent); the rest of the state is solved consistently.
    Uic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    pub dt: f64,
    pub t_end: f64,
    pub initial: Initial,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransientResult {
    pub times: Vec<f64>,
    pub node_names: Vec<String>,
    /// `[step][node]`, ground included.
    pub voltages: Vec<Vec<f64>>,
    /// Branch currents of inductors and voltage sources, `[element][step]`.
    pub currents: BTreeMap<String, Vec<f64>>,
    pub kcl_residual: f64,
}

impl TransientResult {
    pub fn voltage(&self, node: &str) -> Option<Vec<f64>> {
        let i = self.node_names.iter().position(|n| n == node)?;
        Some(self.voltages.iter().map(|v| v[i]).collect())
    }
}

/// Initial state with capacitors held at their `ic` and inductors carrying theirs.
fn uic_state(net: &Netlist, lay: &Layout, g: &DMatrix<f64>) -> Result<DVector<f64>> {
    let caps: Vec<(usize, usize, f64)> = net
        .elements()
        .iter()
        .filter_map(|e| match e.kind {
            ElementKind::Capacitor { ic, .. } => Some((e.nodes[0], e.nodes[1], ic.unwrap_or(0.0))),
            _ => None,
        })
        .collect();
    let dim = lay.dim + caps.len();
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (lay.dim, lay.dim)).copy_from(g);
    let mut b = DVector::zeros(dim);
    b.rows_mut(0, lay.dim).copy_from(&rhs_real(net, lay, Some(0.0)));
    for (e, br) in net.elements().iter().zip(&lay.branch) {
        if let ElementKind::Inductor { ic, .. } = e.kind {
            let k = br.unwrap();
            a.row_mut(k).fill(0.0);
            a[(k, k)] = 1.0;
            b[k] = ic.unwrap_or(0.0);
        }
    }
    for (j, (p, m, v)) in caps.into_iter().enumerate() {
        let k = lay.dim + j;
        let mut s = Stamp { a: &mut a };
        s.incidence(lay, p, m, k, 1.0);
        s.voltage_row(lay, k, p, m, 1.0);
        b[k] = v;
    }
    let x = a
        .lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Topology("inconsistent initial conditions (capacitor loop?)".into()))?;
    Ok(x.rows(0, lay.dim).into_owned())
}

/// Source jump times.
fn jumps(net: &Netlist) -> Vec<f64> {
    net.elements()
        .iter()
        .filter_map(|e| match &e.kind {
            ElementKind::VSource(s) | ElementKind::ISource(s) => s.wave.as_ref().and_then(|w| w.jump()),
            _ => None,
        })
        .collect()
}

/// Trapezoidal integration of `G x + C ẋ = b(t)` with fixed `dt`. A step
/// that starts on a source jump uses backward Euler instead, which keeps
/// the trapezoidal rule from averaging across the discontinuity.
pub fn transient_solve(net: &Netlist, opts: &TransientOptions) -> Result<TransientResult> {
    if !(opts.dt > 0.0 && opts.t_end > 0.0) {
        return Err(Error::Input("transient needs dt > 0 and t_end > 0".into()));
    }
    if let Some(e) = net
        .elements()
        .iter()
        .find(|e| matches!(e.kind, ElementKind::FreqResistor { .. } | ElementKind::TLine(_)))
    {
        return Err(Error::Capability(format!(
            "`{}` is frequency-domain only and cannot be used in transient analysis",
            e.name
        )));
    }
    let lay = Layout::new(net)?;
    let (g, c) = assemble_static(net, &lay, None)?;
    let mut x = match opts.initial {
        Initial::OperatingPoint => {
            let b0 = rhs_real(net, &lay, Some(0.0));
            g.clone().lu().solve(&b0).ok_or_else(|| singular(net, false))?
        }
        Initial::Uic => uic_state(net, &lay, &g)?,
    };
    let c2 = &c * (2.0 / opts.dt);
    let a = &g + &c2;
    let back = &c2 - &g;
    let lu = a.clone().lu();
    let jumps = jumps(net);
    let mut euler: Option<(DMatrix<f64>, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let tracked: Vec<(String, usize)> = net
        .elements()
        .iter()
        .zip(&lay.branch)
        .filter(|(e, _)| matches!(e.kind, ElementKind::Inductor { .. } | ElementKind::VSource(_)))
        .map(|(e, b)| (e.name.clone(), b.unwrap()))
        .collect();
    let mut currents: BTreeMap<String, Vec<f64>> = tracked.iter().map(|(n, _)| (n.clone(), vec![])).collect();
    let mut times = Vec::with_capacity(steps + 1);
    let mut voltages = Vec::with_capacity(steps + 1);
    let mut record = |t: f64, x: &DVector<f64>, currents: &mut BTreeMap<String, Vec<f64>>| {
        times.push(t);
        voltages.push(node_voltages(x, &lay));
        for (n, k) in &tracked {
            currents.get_mut(n).unwrap().push(x[*k]);
        }
    };
    record(0.0, &x, &mut currents);
    let mut b_prev = rhs_real(net, &lay, Some(0.0));
    let mut worst = 0.0f64;
    for k in 1..=steps {
        let t = k as f64 * opts.dt;
        let b = rhs_real(net, &lay, Some(t));
        let t_prev = t - opts.dt;
        let at_jump = jumps.iter().any(|&d| d >= t_prev - 1e-12 * opts.dt && d < t);
        let (next, m, rhs) = if at_jump {
            let (m, lu_be) = euler.get_or_insert_with(|| {
                let m = &g + &c * (1.0 / opts.dt);
                let f = m.clone().lu();
                (m, f)
            });
            let rhs = &c * (1.0 / opts.dt) * &x + &b;
            (lu_be.solve(&rhs), &*m, rhs)
        } else {
            let rhs = &back * &x + &b + &b_prev;
            (lu.solve(&rhs), &a, rhs)
        };
        let next = next
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| singular(net, false))?;
        worst = worst.max(kcl(m, &next, &rhs, lay.nodes));
        x = next;
        b_prev = b;
        record(t, &x, &mut currents);
    }
    Ok(TransientResult {
        times,
        node_names: net.node_names().to_vec(),
        voltages,
        currents,
        kcl_residual: worst,
    })
}
