//! Distance-dependent coupling parameters of a via pair.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::electrostatic::{extract_capacitance, solve_electrostatic, ElectrostaticOptions, ElectrostaticProblem};
use super::filament::{discretize_filaments, FilamentSolver, DEFAULT_REFERENCE_RADIUS};
use crate::error::{Error, Result};
use crate::model::{build_cross_section, CrossSection, MaskOptions, Material, PlacedShape, Primitive};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Frequency of the filament solve for `R_k` and `L_k`, Hz (> 0).
    pub frequency: f64,
    pub cell_size: f64,
    pub reference_radius: f64,
    pub electrostatic: ElectrostaticOptions,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            frequency: 1e9,
            cell_size: 0.5e-6,
            reference_radius: DEFAULT_REFERENCE_RADIUS,
            electrostatic: ElectrostaticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    /// Center distance, m.
    pub distance: f64,
    /// Proximity-induced resistance increase per via in differential drive, Ω/m.
    pub r_k: f64,
    /// Mutual inductance, H/m.
    pub l_k: f64,
    /// F/m
    pub c_k: f64,
    /// S/m
    pub g_k: f64,
    /// Resistance of the isolated via at the sweep frequency, Ω/m.
    pub r_self: f64,
    /// Self inductance with the partner present, H/m.
    pub l_self: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub frequency: f64,
    pub rows: Vec<CouplingRow>,
}

impl CouplingTable {
    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.distance).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("distance_m,rk_ohm_per_m,lk_h_per_m,ck_f_per_m,gk_s_per_m\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.distance, r.r_k, r.l_k, r.c_k, r.g_k));
        }
        s
    }
}

fn single_primitive(via: &CrossSection) -> Result<Primitive> {
    match via {
        CrossSection::Circle { radius } => Ok(Primitive::Circle { radius: *radius }),
        CrossSection::Rectangle { width, height } => Ok(Primitive::Rectangle {
            width: *width,
            height: *height,
        }),
        CrossSection::Polygon { vertices } => Ok(Primitive::Polygon {
            vertices: vertices.clone(),
        }),
        CrossSection::Composite(_) => Err(Error::Input(
            "coupling sweep needs a single-shape via cross-section".into(),
        )),
    }
}

pub fn coupling_sweep(
    via: &CrossSection,
    via_material: &Material,
    substrate: &Material,
    distances: &[f64],
    opts: &CouplingOptions,
) -> Result<CouplingTable> {
    let prim = single_primitive(via)?;
    if !(opts.frequency > 0.0) {
        return Err(Error::Input("coupling sweep frequency must be > 0".into()));
    }
    if distances.is_empty() || distances.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("distances must be non-empty and strictly increasing".into()));
    }
    let b = via.bbox();
    let width = b[1] - b[0];
    if let Some(&x) = distances.iter().find(|&&x| !(x > width)) {
        return Err(Error::Geometry(format!(
            "vias of width {width:e} overlap at distance {x:e}"
        )));
    }
    let sigma = via_material.conductivity;
    let omega = 2.0 * PI * opts.frequency;
    let mask_opts = MaskOptions::new(opts.cell_size);

    let iso_mask = build_cross_section(via, &mask_opts)?;
    let iso = discretize_filaments(&iso_mask, &[sigma], opts.reference_radius)?;
    let (iso_point, _) = FilamentSolver::new(&iso)?.solve(opts.frequency)?;
    let r_iso = iso_point.r_eff;

    let sub_eps = substrate.relative_permittivity * crate::EPS0;
    let mut rows = Vec::with_capacity(distances.len());
    for &x in distances {
        let part = |cx: f64, g| PlacedShape::new(prim.clone(), [cx, 0.0], g);
        let pair = CrossSection::Composite(vec![part(-0.5 * x, 0), part(0.5 * x, 1)]);
        let mask = build_cross_section(&pair, &mask_opts)?;
        let mut sys = discretize_filaments(&mask, &[sigma, sigma], opts.reference_radius)?;
        sys.set_group_currents(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])?;
        let (p, _) = FilamentSolver::new(&sys)?.solve(opts.frequency)?;
        let (z11, z21) = (p.field[0], p.field[1]);

        let problem = ElectrostaticProblem {
            conductors: vec![part(-0.5 * x, 0), part(0.5 * x, 1)],
            potentials: vec![0.5, -0.5],
            background_eps_r: substrate.relative_permittivity,
            dielectrics: Vec::new(),
        };
        let field = solve_electrostatic(&problem, &opts.electrostatic)?;
        let c_k = extract_capacitance(&field)?;
        rows.push(CouplingRow {
            distance: x,
            r_k: (z11 - z21).re - r_iso,
            l_k: z21.im / omega,
            c_k,
            g_k: substrate.conductivity / sub_eps * c_k,
            r_self: r_iso,
            l_self: z11.im / omega,
        });
    }
    Ok(CouplingTable {
        frequency: opts.frequency,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MaterialDb;

    const UM: f64 = 1e-6;

    fn opts() -> CouplingOptions {
        CouplingOptions {
            cell_size: 1.0 * UM,
            electrostatic: ElectrostaticOptions {
                nodes: 121,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn table_is_populated_and_monotone() {
        let db = MaterialDb::builtin();
        let via = CrossSection::circle_diameter(10.0 * UM);
        let mut sub = db.get("silicon").unwrap().clone();
        sub.conductivity = 10.0;
        let xs = [15.0 * UM, 20.0 * UM, 30.0 * UM, 50.0 * UM];
        let t = coupling_sweep(&via, db.get("copper").unwrap(), &sub, &xs, &opts()).unwrap();
        assert_eq!(t.rows.len(), 4);
        for w in t.rows.windows(2) {
            assert!(w[1].c_k < w[0].c_k);
            assert!(w[1].l_k < w[0].l_k);
        }
        for r in &t.rows {
            assert!(r.c_k > 0.0 && r.g_k > 0.0 && r.r_k.is_finite());
            let ratio = 10.0 / (11.7 * crate::EPS0);
            assert!((r.g_k / (ratio * r.c_k) - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.to_csv().lines().count(), 5);
    }

    #[test]
    fn insulating_substrate_has_no_conductance() {
        let db = MaterialDb::builtin();
        let via = CrossSection::circle_diameter(10.0 * UM);
        let t = coupling_sweep(
            &via,
            db.get("copper").unwrap(),
            db.get("silicon").unwrap(),
            &[20.0 * UM],
            &opts(),
        )
        .unwrap();
        assert_eq!(t.rows[0].g_k, 0.0);
    }

    #[test]
    fn overlapping_distance_rejected() {
        let db = MaterialDb::builtin();
        let via = CrossSection::circle_diameter(10.0 * UM);
        let r = coupling_sweep(
            &via,
            db.get("copper").unwrap(),
            db.get("silicon").unwrap(),
            &[8.0 * UM, 20.0 * UM],
            &opts(),
        );
        assert!(matches!(r, Err(Error::Geometry(_))));
    }
}
