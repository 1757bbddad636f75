//! SPICE-like subcircuit export and DC re-import.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::circuit::{dc_solve, parse_netlist, NetlistContext};
use crate::em::CouplingRow;
use crate::error::{Error, Result};
use crate::mor::ReducedModel;
use crate::thermal::ThermalNetwork;

/// Objects with a subcircuit realization.
#[derive(Debug, Clone, Copy)]
pub enum SpiceObject<'a> {
    /// Two coupled vias of `length` (m); pins `a1 b1 a2 b2`.
    Coupling { row: &'a CouplingRow, length: f64 },
    /// Node voltages are temperature rises above the network reference.
    Thermal(&'a ThermalNetwork),
    /// Pin voltages equal the model outputs including the offset.
    Reduced(&'a ReducedModel),
}

fn token(s: &str) -> String {
    s.chars().map(|c| if c.is_whitespace() || c == '=' { '_' } else { c }).collect()
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Export(format!("{what} is not finite ({v})")))
    }
}

/// Writes `.SUBCKT <name> <pins>` … `.ENDS`.
pub fn export_spice_subckt(object: SpiceObject<'_>, name: &str) -> Result<String> {
    let name = token(name);
    if name.is_empty() {
        return Err(Error::Export("subcircuit name is empty".into()));
    }
    match object {
        SpiceObject::Coupling { row, length } => coupling(row, length, &name),
        SpiceObject::Thermal(net) => thermal(net, &name),
        SpiceObject::Reduced(m) => reduced(m, &name),
    }
}

fn coupling(row: &CouplingRow, length: f64, name: &str) -> Result<String> {
    if !(length > 0.0) {
        return Err(Error::Export("via length must be > 0".into()));
    }
    let r = finite("via resistance", (row.r_self + row.r_k) * length)?;
    let l = finite("self inductance", row.l_self * length)?;
    let c = finite("coupling capacitance", row.c_k * length)?;
    let g = finite("coupling conductance", row.g_k * length)?;
    let k = finite("coupling coefficient", row.l_k / row.l_self)?;
    if !(r > 0.0 && l > 0.0) || k.abs() > 1.0 || c < 0.0 || g < 0.0 {
        return Err(Error::Export(format!(
            "coupling row at {:e} m is not a passive RLCG model",
            row.distance
        )));
    }
    let mut s = String::new();
    let _ = writeln!(s, "* via pair at {:e} m, length {length:e} m", row.distance);
    let _ = writeln!(s, ".SUBCKT {name} a1 b1 a2 b2");
    for v in ["1", "2"] {
        let _ = writeln!(s, "R{v} a{v} m{v} {r:e}");
        let _ = writeln!(s, "L{v} m{v} b{v} {l:e}");
    }
    let _ = writeln!(s, "K12 L1 L2 {k:e}");
    let _ = writeln!(s, "Ck m1 m2 {c:e}");
    let _ = writeln!(s, "Gk m1 m2 m1 m2 {g:e}");
    let _ = writeln!(s, ".ENDS {name}");
    Ok(s)
}

fn thermal(net: &ThermalNetwork, name: &str) -> Result<String> {
    let n = net.len();
    let mut label: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let pins: Vec<String> = net.port_names.iter().map(|p| format!("p_{}", token(p))).collect();
    let direct: Vec<Option<usize>> = net
        .port_weights
        .iter()
        .map(|w| (w.len() == 1 && w[0].1 == 1.0).then_some(w[0].0))
        .collect();
    for (k, d) in direct.iter().enumerate() {
        if let Some(i) = d {
            label[*i] = pins[k].clone();
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "* node voltage is the temperature rise above {:e} K", net.reference);
    let _ = writeln!(s, ".SUBCKT {name} {}", pins.join(" "));
    for i in 0..n {
        for (j, g) in net.g.row(i) {
            if j > i && g != 0.0 {
                let r = finite("thermal resistance", -1.0 / g)?;
                let _ = writeln!(s, "R{i}_{j} {} {} {r:e}", label[i], label[j]);
            }
        }
        let gb = net.boundary_g[i];
        if gb != 0.0 {
            let _ = writeln!(s, "Rb{i} {} 0 {:e}", label[i], finite("boundary resistance", 1.0 / gb)?);
        }
        let q = net.boundary_rhs[i];
        if q != 0.0 {
            let _ = writeln!(s, "Ib{i} 0 {} {:e}", label[i], finite("boundary heat", q)?);
        }
        let c = finite("heat capacity", net.c[i])?;
        if c != 0.0 {
            let _ = writeln!(s, "C{i} {} 0 {c:e}", label[i]);
        }
    }
    for (k, w) in net.port_weights.iter().enumerate() {
        if direct[k].is_some() {
            continue;
        }
        let terms: Vec<(String, f64)> = w.iter().map(|&(i, v)| (label[i].clone(), v)).collect();
        port_chain(&mut s, k, &pins[k], &terms, &terms, 0.0)?;
    }
    let _ = writeln!(s, ".ENDS {name}");
    Ok(s)
}

/// Pin `pin` feeds `w·i` into each `inject` node through a sense source and
/// reads back `Σ w·v + offset` over `read` through a chain of controlled sources.
fn port_chain(
    s: &mut String,
    k: usize,
    pin: &str,
    inject: &[(String, f64)],
    read: &[(String, f64)],
    offset: f64,
) -> Result<()> {
    let _ = writeln!(s, "Vs{k} {pin} x{k}_0 0");
    for (j, (node, w)) in inject.iter().enumerate() {
        let w = finite("port weight", *w)?;
        let _ = writeln!(s, "F{k}_{j} 0 {node} Vs{k} {w:e}");
    }
    for (j, (node, w)) in read.iter().enumerate() {
        let w = finite("port weight", *w)?;
        let _ = writeln!(s, "E{k}_{j} x{k}_{j} x{k}_{} {node} 0 {w:e}", j + 1);
    }
    let _ = writeln!(s, "Vo{k} x{k}_{} 0 {:e}", read.len(), finite("output offset", offset)?);
    Ok(())
}

fn reduced(m: &ReducedModel, name: &str) -> Result<String> {
    let q = m.g.nrows();
    if m.b.ncols() != m.l.ncols() {
        return Err(Error::Export("reduced model needs as many inputs as outputs".into()));
    }
    if m.g.iter().chain(m.c.iter()).chain(m.b.iter()).chain(m.l.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Export("reduced model has non-finite entries".into()));
    }
    let chol = m
        .g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Export("reduced conductance matrix is not positive definite".into()))?;
    let r = chol.l();
    let inv = |x: &DMatrix<f64>| r.solve_lower_triangular(x).expect("Cholesky factor is nonsingular");
    // R⁻¹ C R⁻ᵀ
    let a = inv(&inv(&m.c).transpose());
    let a = 0.5 * (&a + a.transpose());
    let eig = a.symmetric_eigen();
    let bw = eig.eigenvectors.transpose() * inv(&m.b);
    let lw = eig.eigenvectors.transpose() * inv(&m.l);
    let pins: Vec<String> = m.port_names.iter().map(|p| format!("p_{}", token(p))).collect();
    let mut s = String::new();
    let _ = writeln!(s, "* order-{q} reduced model in modal coordinates");
    let _ = writeln!(s, ".SUBCKT {name} {}", pins.join(" "));
    for j in 0..q {
        let _ = writeln!(s, "Rs{j} s{j} 0 1");
        let c = eig.eigenvalues[j].max(0.0);
        if c > 0.0 {
            let _ = writeln!(s, "Cs{j} s{j} 0 {c:e}");
        }
    }
    let states = |w: &DMatrix<f64>, p: usize| -> Vec<(String, f64)> { (0..q).map(|j| (format!("s{j}"), w[(j, p)])).collect() };
    for (p, pin) in pins.iter().enumerate() {
        let offset = m.output_offset.get(p).copied().unwrap_or(0.0);
        port_chain(&mut s, p, pin, &states(&bw, p), &states(&lw, p), offset)?;
    }
    let _ = writeln!(s, ".ENDS {name}");
    Ok(s)
}

/// How pins are driven by [`subckt_dc_response`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// Unit current into one pin, others open: pin voltages (impedance).
    Current,
    /// Unit voltage on one pin, others grounded: pin currents (admittance).
    Voltage,
}

/// DC port matrix of subcircuit `name` in `text`, with the zero-input
/// response subtracted. Column `p` answers the drive on pin `p`.
pub fn subckt_dc_response(text: &str, name: &str, drive: Drive) -> Result<DMatrix<f64>> {
    let pins = text
        .lines()
        .map(str::split_whitespace)
        .find_map(|mut t| {
            let head = t.next()?;
            let n = t.next()?;
            (head.eq_ignore_ascii_case(".subckt") && n.eq_ignore_ascii_case(name)).then(|| t.count())
        })
        .ok_or_else(|| Error::Reference(format!("subcircuit `{name}` not found")))?;
    let ctx = NetlistContext::default();
    let run = |active: Option<usize>| -> Result<Vec<f64>> {
        let mut deck = String::from(text);
        deck.push('\n');
        let list: Vec<String> = (0..pins).map(|p| format!("t{p}")).collect();
        let _ = writeln!(deck, "Xdut {} {name}", list.join(" "));
        for p in 0..pins {
            let v = if active == Some(p) { 1 } else { 0 };
            match drive {
                Drive::Current => {
                    let _ = writeln!(deck, "Id{p} 0 t{p} {v}");
                }
                Drive::Voltage => {
                    let _ = writeln!(deck, "Vd{p} t{p} 0 {v}");
                }
            }
        }
        let net = parse_netlist(&deck, &ctx)?;
        let dc = dc_solve(&net)?;
        Ok((0..pins)
            .map(|p| match drive {
                Drive::Current => dc.voltage(&format!("t{p}")).unwrap_or(0.0),
                Drive::Voltage => -dc.currents[&format!("Vd{p}")],
            })
            .collect())
    };
    let base = run(None)?;
    let mut m = DMatrix::zeros(pins, pins);
    for p in 0..pins {
        let r = run(Some(p))?;
        for q in 0..pins {
            m[(q, p)] = r[q] - base[q];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use crate::model::MaterialDb;
    use crate::mor::{dc_gain, reduce_arnoldi, StateSpaceRC};
    use crate::thermal::{default_boundaries, extract_thermal_network, Port, VoxelGrid};

    fn row() -> CouplingRow {
        CouplingRow {
            distance: 20e-6,
            r_k: 1.0,
            l_k: 2e-7,
            c_k: 1e-10,
            g_k: 0.5,
            r_self: 3.0,
            l_self: 5e-7,
        }
    }

    fn count(text: &str, prefix: char) -> usize {
        text.lines().filter(|l| l.starts_with(prefix)).count()
    }

    #[test]
    fn coupling_elements_and_admittance() {
        let len = 0.5;
        let text = export_spice_subckt(SpiceObject::Coupling { row: &row(), length: len }, "pair").unwrap();
        for p in ['R', 'L', 'K', 'C', 'G'] {
            assert!(count(&text, p) >= 1, "{p} missing:\n{text}");
        }
        // DC: inductors short, capacitor open
        let r = (3.0 + 1.0) * len;
        let g = 0.5 * len;
        let y = subckt_dc_response(&text, "pair", Drive::Voltage).unwrap();
        // pins a1 b1 a2 b2
        let mut want = DMatrix::zeros(4, 4);
        for (a, b) in [(0, 1), (2, 3)] {
            want[(a, a)] = 1.0 / r;
            want[(b, b)] = 1.0 / r + g;
            want[(a, b)] = -1.0 / r;
            want[(b, a)] = -1.0 / r;
        }
        want[(1, 3)] = -g;
        want[(3, 1)] = -g;
        assert!((&y - &want).amax() < 1e-12, "{y}");
    }

    #[test]
    fn two_node_thermal_elements() {
        let mut t = TripletBuilder::new(2);
        t.add_conductance(0, 1, 4.0);
        let net = ThermalNetwork {
            g: t.build(),
            c: vec![1e-3, 2e-3],
            boundary_rhs: vec![0.0; 2],
            boundary_g: vec![0.0; 2],
            reference: 300.0,
            port_names: vec!["hot".into()],
            port_weights: vec![vec![(1, 1.0)]],
            port_base: vec![0.0],
        };
        let text = export_spice_subckt(SpiceObject::Thermal(&net), "th").unwrap();
        assert_eq!(count(&text, 'R'), 1, "{text}");
        assert_eq!(count(&text, 'C'), 2, "{text}");
        assert!(text.contains("R0_1 n0 p_hot 2.5e-1"), "{text}");
    }

    fn small_network() -> ThermalNetwork {
        let si = MaterialDb::builtin().get("silicon").unwrap().clone();
        let grid = VoxelGrid::uniform([4, 3, 3], [1e-4, 1e-4, 5e-5], si, default_boundaries()).unwrap();
        let top = |x| grid.index(x, 1, 2);
        let ports = vec![
            Port { name: "a".into(), voxels: vec![top(0)] },
            Port { name: "b".into(), voxels: vec![top(2), top(3)] },
        ];
        extract_thermal_network(&grid, &ports).unwrap()
    }

    #[test]
    fn thermal_round_trip_dc() {
        let net = small_network();
        let text = export_spice_subckt(SpiceObject::Thermal(&net), "th").unwrap();
        let z = subckt_dc_response(&text, "th", Drive::Current).unwrap();
        let want = dc_gain(&StateSpaceRC::from_network(&net)).unwrap();
        assert!((&z - &want).amax() <= 1e-9 * want.amax(), "{z}\n{want}");
    }

    #[test]
    fn reduced_round_trip_dc() {
        let net = small_network();
        let m = reduce_arnoldi(&StateSpaceRC::from_network(&net), 4).unwrap();
        let text = export_spice_subckt(SpiceObject::Reduced(&m), "rom").unwrap();
        let z = subckt_dc_response(&text, "rom", Drive::Current).unwrap();
        let want = dc_gain(&m).unwrap();
        assert!((&z - &want).amax() <= 1e-9 * want.amax(), "{z}\n{want}");
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = row();
        r.c_k = f64::NAN;
        let e = export_spice_subckt(SpiceObject::Coupling { row: &r, length: 1.0 }, "x").unwrap_err();
        assert!(matches!(e, Error::Export(_)));
    }
}
