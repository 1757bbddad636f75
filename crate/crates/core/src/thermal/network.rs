//! The voxel discretization viewed as a thermal RC network.

use super::grid::{Port, VoxelGrid};
use super::solve::{assemble, finish, solve_rise, ThermalSolution};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Anything that maps port powers to steady port temperatures.
pub trait ThermalModel {
    fn port_count(&self) -> usize;

    fn port_names(&self) -> Vec<String>;

    /// Steady port temperatures (K) for the given port powers (W).
    fn steady_port_temperatures(&self, powers: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct ThermalNetwork {
    /// W/K; boundary conductances sit on the diagonal.
    pub g: CsrMatrix,
    /// J/K per node.
    pub c: Vec<f64>,
    /// Boundary injection `Σ g_b·(T_b − T_ref)` per node, W.
    pub boundary_rhs: Vec<f64>,
    pub boundary_g: Vec<f64>,
    pub reference: f64,
    pub port_names: Vec<String>,
    /// Volume weights per port; they sum to one. Ports both receive power
    /// (spread by these weights) and report the weighted temperature.
    pub port_weights: Vec<Vec<(usize, f64)>>,
    /// Port temperatures with zero power, K.
    pub port_base: Vec<f64>,
}

pub fn extract_thermal_network(grid: &VoxelGrid, ports: &[Port]) -> Result<ThermalNetwork> {
    let mut owner = vec![usize::MAX; grid.len()];
    for (k, p) in ports.iter().enumerate() {
        if p.voxels.is_empty() {
            return Err(Error::config(format!("port `{}` has no voxels", p.name)));
        }
        for &v in &p.voxels {
            if v >= grid.len() {
                return Err(Error::config(format!("port `{}` lies outside the grid", p.name)));
            }
            if owner[v] != usize::MAX {
                let other = if owner[v] == k { &p.name } else { &ports[owner[v]].name };
                return Err(Error::config(format!(
                    "ports `{}` and `{}` overlap at voxel {v}",
                    other, p.name
                )));
            }
            owner[v] = k;
        }
    }
    if !grid.has_heat_path() {
        return Err(Error::Physics(
            "all faces are adiabatic; the network has no thermal ground".into(),
        ));
    }
    let a = assemble(grid)?;
    let port_weights: Vec<Vec<(usize, f64)>> = ports
        .iter()
        .map(|p| {
            let v: f64 = p.voxels.iter().map(|&i| grid.volume(i)).sum();
            p.voxels.iter().map(|&i| (i, grid.volume(i) / v)).collect()
        })
        .collect();
    let mut net = ThermalNetwork {
        g: a.g.clone(),
        c: a.capacity.clone(),
        boundary_rhs: a.boundary_rhs.clone(),
        boundary_g: a.boundary_g.clone(),
        reference: a.reference,
        port_names: ports.iter().map(|p| p.name.clone()).collect(),
        port_weights,
        port_base: Vec::new(),
    };
    let base = net.solve_nodal(&vec![0.0; grid.len()])?;
    net.port_base = net.observe(&base.temperature);
    Ok(net)
}

impl ThermalNetwork {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    fn assembly(&self) -> super::solve::Assembly {
        super::solve::Assembly {
            g: self.g.clone(),
            boundary_g: self.boundary_g.clone(),
            boundary_rhs: self.boundary_rhs.clone(),
            capacity: self.c.clone(),
            reference: self.reference,
        }
    }

    /// Steady field for a nodal power vector (W).
    pub fn solve_nodal(&self, power: &[f64]) -> Result<ThermalSolution> {
        if power.len() != self.len() {
            return Err(Error::Input("power vector length differs from node count".into()));
        }
        let a = self.assembly();
        let (theta, it) = solve_rise(&a, power)?;
        Ok(finish(&a, theta, power, it))
    }

    /// Nodal powers for the given port powers.
    pub fn port_injection(&self, powers: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        for (w, &pk) in self.port_weights.iter().zip(powers) {
            for &(i, s) in w {
                p[i] += s * pk;
            }
        }
        p
    }

    pub fn observe(&self, temperature: &[f64]) -> Vec<f64> {
        self.port_weights
            .iter()
            .map(|w| w.iter().map(|&(i, s)| s * temperature[i]).sum())
            .collect()
    }

    /// Input map `B` (n × ports), identical to the output map `L`.
    pub fn port_matrix(&self) -> nalgebra::DMatrix<f64> {
        let mut b = nalgebra::DMatrix::zeros(self.len(), self.port_weights.len());
        for (k, w) in self.port_weights.iter().enumerate() {
            for &(i, s) in w {
                b[(i, k)] = s;
            }
        }
        b
    }
}

impl ThermalModel for ThermalNetwork {
    fn port_count(&self) -> usize {
        self.port_names.len()
    }

    fn port_names(&self) -> Vec<String> {
        self.port_names.clone()
    }

    fn steady_port_temperatures(&self, powers: &[f64]) -> Result<Vec<f64>> {
        if powers.len() != self.port_count() {
            return Err(Error::Input(format!(
                "{} port powers for {} ports",
                powers.len(),
                self.port_count()
            )));
        }
        let s = self.solve_nodal(&self.port_injection(powers))?;
        Ok(self.observe(&s.temperature))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MaterialDb;
    use crate::thermal::grid::{default_boundaries, BoundaryCondition, PowerMap};
    use crate::thermal::solve::solve_steady;

    fn si() -> crate::model::Material {
        MaterialDb::builtin().get("silicon").unwrap().clone()
    }

    #[test]
    fn two_voxel_conductance() {
        let a = BoundaryCondition::Adiabatic;
        let g = VoxelGrid::uniform([2, 1, 1], [1e-5, 2e-5, 3e-5], si(), [a, a, a, a, BoundaryCondition::Fixed { temperature: 300.0 }, a]).unwrap();
        let net = extract_thermal_network(&g, &[]).unwrap();
        let expect = 148.0 * 2e-5 * 3e-5 / 1e-5;
        assert!((-net.g.get(0, 1) / expect - 1.0).abs() < 1e-12);
        assert_eq!(net.g.get(0, 1), net.g.get(1, 0));
    }

    #[test]
    fn row_sums_are_boundary_conductance() {
        let g = VoxelGrid::uniform([3, 3, 3], [1e-5; 3], si(), default_boundaries()).unwrap();
        let net = extract_thermal_network(&g, &[]).unwrap();
        for (i, s) in net.g.row_sums().iter().enumerate() {
            assert!((s - net.boundary_g[i]).abs() <= 1e-12 * net.g.get(i, i));
        }
        assert!(net.g.asymmetry() == 0.0);
        assert!(net.c.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn network_matches_field_solve() {
        let g = VoxelGrid::uniform([4, 4, 3], [1e-5; 3], si(), default_boundaries()).unwrap();
        let top = g.index(1, 2, 2);
        let p = PowerMap::constant(vec![top], 1e-3);
        let field = solve_steady(&g, &p).unwrap();
        let port = Port {
            name: "hot".into(),
            voxels: vec![top],
        };
        let net = extract_thermal_network(&g, &[port]).unwrap();
        let s = net.solve_nodal(&p.nodal(&g, None)).unwrap();
        for (a, b) in s.temperature.iter().zip(&field.temperature) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
        let t = net.steady_port_temperatures(&[1e-3]).unwrap();
        assert!((t[0] - field.temperature[top]).abs() < 1e-9);
        assert_eq!(net.port_base, vec![300.0]);
    }

    #[test]
    fn overlapping_ports_rejected() {
        let g = VoxelGrid::uniform([2, 2, 2], [1e-5; 3], si(), default_boundaries()).unwrap();
        let a = Port {
            name: "a".into(),
            voxels: vec![0, 1],
        };
        let b = Port {
            name: "b".into(),
            voxels: vec![1, 2],
        };
        assert!(matches!(extract_thermal_network(&g, &[a, b]), Err(Error::Config { .. })));
    }
}
