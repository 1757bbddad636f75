//! Finite-volume assembly and the steady and transient heat solves.
//!
//! Unknowns are temperature rises over [`VoxelGrid::reference_temperature`],
//! which keeps the energy balance free of cancellation against ~300 K.

use serde::{Deserialize, Serialize};

use super::grid::{BoundaryCondition, Port, PowerMap, VoxelGrid};
use crate::error::{Error, Result};
use crate::linalg::{pcg, CsrMatrix, PcgOptions, TripletBuilder};

pub(crate) const SOLVE_TOL: f64 = 1e-12;

/// `G·θ = P + b` in rise variables, with capacities `C`.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub g: CsrMatrix,
    /// Boundary conductance per node, W/K.
    pub boundary_g: Vec<f64>,
    /// `Σ g_b · (T_b − T_ref)` per node, W.
    pub boundary_rhs: Vec<f64>,
    /// J/K
    pub capacity: Vec<f64>,
    pub reference: f64,
}

fn half_resistance(d: f64, k: f64) -> f64 {
    0.5 * d / k
}

pub fn assemble(grid: &VoxelGrid) -> Result<Assembly> {
    grid.validate()?;
    let n = grid.len();
    let t_ref = grid.reference_temperature();
    let mut tb = TripletBuilder::with_capacity(n, 7 * n);
    let mut boundary_g = vec![0.0; n];
    let mut boundary_rhs = vec![0.0; n];
    let k = |i: usize| grid.material_of(i).thermal_conductivity;
    let (ax, ay) = (grid.dy, grid.dx);
    for z in 0..grid.nz {
        let dz = grid.dz[z];
        for y in 0..grid.ny {
            for x in 0..grid.nx {
                let i = grid.index(x, y, z);
                if x + 1 < grid.nx {
                    let j = i + 1;
                    let g = ax * dz / (half_resistance(grid.dx, k(i)) + half_resistance(grid.dx, k(j)));
                    tb.add_conductance(i, j, g);
                }
                if y + 1 < grid.ny {
                    let j = grid.index(x, y + 1, z);
                    let g = ay * dz / (half_resistance(grid.dy, k(i)) + half_resistance(grid.dy, k(j)));
                    tb.add_conductance(i, j, g);
                }
                if z + 1 < grid.nz {
                    let j = grid.index(x, y, z + 1);
                    let g = grid.dx * grid.dy
                        / (half_resistance(dz, k(i)) + half_resistance(grid.dz[z + 1], k(j)));
                    tb.add_conductance(i, j, g);
                }
                let faces = [
                    (x == 0, 0, grid.dy * dz, grid.dx),
                    (x + 1 == grid.nx, 1, grid.dy * dz, grid.dx),
                    (y == 0, 2, grid.dx * dz, grid.dy),
                    (y + 1 == grid.ny, 3, grid.dx * dz, grid.dy),
                    (z == 0, 4, grid.dx * grid.dy, dz),
                    (z + 1 == grid.nz, 5, grid.dx * grid.dy, dz),
                ];
                for (on, face, area, d) in faces {
                    if !on {
                        continue;
                    }
                    let (g, t) = match grid.boundaries[face] {
                        BoundaryCondition::Adiabatic => continue,
                        BoundaryCondition::Fixed { temperature } => {
                            (area / half_resistance(d, k(i)), temperature)
                        }
                        BoundaryCondition::Convective { h, ambient } => {
                            (area / (half_resistance(d, k(i)) + 1.0 / h), ambient)
                        }
                    };
                    tb.add(i, i, g);
                    boundary_g[i] += g;
                    boundary_rhs[i] += g * (t - t_ref);
                }
            }
        }
    }
    let capacity = (0..n)
        .map(|i| grid.material_of(i).heat_capacity * grid.volume(i))
        .collect();
    Ok(Assembly {
        g: tb.build(),
        boundary_g,
        boundary_rhs,
        capacity,
        reference: t_ref,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSolution {
    /// K per voxel.
    pub temperature: Vec<f64>,
    pub t_max: f64,
    pub hotspot: usize,
    /// Heat leaving through all boundaries, W.
    pub boundary_heat_flow: f64,
    pub injected_power: f64,
    pub iterations: usize,
}

impl ThermalSolution {
    /// Volume-averaged temperature over a port.
    pub fn port_temperature(&self, grid: &VoxelGrid, port: &Port) -> f64 {
        let (mut s, mut v) = (0.0, 0.0);
        for &i in &port.voxels {
            s += self.temperature[i] * grid.volume(i);
            v += grid.volume(i);
        }
        s / v
    }

    pub fn energy_balance_error(&self) -> f64 {
        let scale = self.injected_power.abs().max(self.boundary_heat_flow.abs());
        if scale == 0.0 {
            return 0.0;
        }
        (self.injected_power - self.boundary_heat_flow).abs() / scale
    }
}

fn hotspot(t: &[f64]) -> (usize, f64) {
    let mut best = (0, t[0]);
    for (i, &v) in t.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub(crate) fn solve_rise(a: &Assembly, nodal_power: &[f64]) -> Result<(Vec<f64>, usize)> {
    let rhs: Vec<f64> = nodal_power
        .iter()
        .zip(&a.boundary_rhs)
        .map(|(p, b)| p + b)
        .collect();
    let mut theta = vec![0.0; rhs.len()];
    let stats = pcg(
        &a.g,
        &rhs,
        &mut theta,
        &PcgOptions {
            rel_tol: SOLVE_TOL,
            ..PcgOptions::default()
        },
    )?;
    Ok((theta, stats.iterations))
}

pub(crate) fn finish(a: &Assembly, theta: Vec<f64>, nodal_power: &[f64], iterations: usize) -> ThermalSolution {
    let injected: f64 = nodal_power.iter().sum();
    let boundary_heat_flow = theta
        .iter()
        .zip(&a.boundary_g)
        .zip(&a.boundary_rhs)
        .map(|((t, g), b)| g * t - b)
        .sum();
    let temperature: Vec<f64> = theta.iter().map(|t| a.reference + t).collect();
    let (hot, t_max) = hotspot(&temperature);
    ThermalSolution {
        temperature,
        t_max,
        hotspot: hot,
        boundary_heat_flow,
        injected_power: injected,
        iterations,
    }
}

pub fn solve_steady(grid: &VoxelGrid, power: &PowerMap) -> Result<ThermalSolution> {
    power.validate(grid)?;
    if !grid.has_heat_path() {
        return Err(Error::Physics(
            "all faces are adiabatic; the steady problem is ill-posed".into(),
        ));
    }
    let a = assemble(grid)?;
    let p = power.nodal(grid, None);
    let (theta, it) = solve_rise(&a, &p)?;
    Ok(finish(&a, theta, &p, it))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Uniform initial temperature, K (default: the reference temperature).
    pub initial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientResult {
    /// s, starting at 0.
    pub times: Vec<f64>,
    /// `[port][step]`, K.
    pub port_temperatures: Vec<Vec<f64>>,
    /// Temperature field at `t_end`.
    pub final_temperature: Vec<f64>,
}

/// Backward-Euler time stepping: `(C/dt + G) θₙ₊₁ = (C/dt) θₙ + P(tₙ₊₁) + b`.
pub fn solve_transient(
    grid: &VoxelGrid,
    power: &PowerMap,
    ports: &[Port],
    opts: &TransientOptions,
) -> Result<TransientResult> {
    power.validate(grid)?;
    if !(opts.dt > 0.0 && opts.t_end > 0.0) {
        return Err(Error::Input("transient needs dt > 0 and t_end > 0".into()));
    }
    let a = assemble(grid)?;
    if let Some(i) = a.capacity.iter().position(|c| !(*c > 0.0)) {
        return Err(Error::Physics(format!("voxel {i} has zero heat capacity")));
    }
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let cdt: Vec<f64> = a.capacity.iter().map(|c| c / opts.dt).collect();
    let m = a.g.add_scaled_diagonal(1.0, 1.0, &cdt);
    let weights: Vec<Vec<(usize, f64)>> = ports
        .iter()
        .map(|p| {
            let v: f64 = p.voxels.iter().map(|&i| grid.volume(i)).sum();
            p.voxels.iter().map(|&i| (i, grid.volume(i) / v)).collect()
        })
        .collect();
    let observe = |theta: &[f64], out: &mut Vec<Vec<f64>>| {
        for (k, w) in weights.iter().enumerate() {
            out[k].push(a.reference + w.iter().map(|&(i, s)| s * theta[i]).sum::<f64>());
        }
    };
    let mut theta = vec![opts.initial.map_or(0.0, |t| t - a.reference); grid.len()];
    let mut times = vec![0.0];
    let mut traces = vec![Vec::with_capacity(steps + 1); ports.len()];
    observe(&theta, &mut traces);
    let pcg_opts = PcgOptions {
        rel_tol: SOLVE_TOL,
        ..PcgOptions::default()
    };
    for s in 1..=steps {
        let t = s as f64 * opts.dt;
        let p = power.nodal(grid, Some(t));
        let rhs: Vec<f64> = (0..grid.len())
            .map(|i| cdt[i] * theta[i] + p[i] + a.boundary_rhs[i])
            .collect();
        let mut next = theta.clone();
        pcg(&m, &rhs, &mut next, &pcg_opts)?;
        theta = next;
        times.push(t);
        observe(&theta, &mut traces);
    }
    Ok(TransientResult {
        times,
        port_temperatures: traces,
        final_temperature: theta.iter().map(|t| a.reference + t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Material, MaterialDb};
    use crate::thermal::grid::default_boundaries;

    fn silicon() -> Material {
        MaterialDb::builtin().get("silicon").unwrap().clone()
    }

    fn rod(nz: usize) -> VoxelGrid {
        let fixed = BoundaryCondition::Fixed { temperature: 300.0 };
        let a = BoundaryCondition::Adiabatic;
        VoxelGrid::uniform([1, 1, nz], [100e-6, 100e-6, 400e-6 / nz as f64], silicon(), [a, a, a, a, fixed, fixed])
            .unwrap()
    }

    #[test]
    fn zero_power_is_equilibrium() {
        let g = VoxelGrid::uniform([4, 3, 2], [1e-5; 3], silicon(), default_boundaries()).unwrap();
        let s = solve_steady(&g, &PowerMap::default()).unwrap();
        assert!(s.temperature.iter().all(|&t| t == 300.0));
    }

    #[test]
    fn rod_midplane_rise() {
        // odd count puts a voxel center on the midplane
        let nz = 41;
        let g = rod(nz);
        let s = solve_steady(&g, &PowerMap::constant(vec![nz / 2], 10e-3)).unwrap();
        let exact: f64 = 10e-3 * 400e-6 / (4.0 * 148.0 * 1e-8);
        assert!((exact - 0.676).abs() < 1e-3);
        assert!((s.t_max - 300.0 - exact).abs() / exact < 0.01);
        assert_eq!(s.hotspot, nz / 2);
        assert!(s.energy_balance_error() < 1e-6);
    }

    #[test]
    fn rod_error_shrinks_with_pitch() {
        // even counts split the source over the two voxels beside the midplane
        let exact = 10e-3 * 400e-6 / (4.0 * 148.0 * 1e-8);
        let errs: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&nz| {
                let s = solve_steady(&rod(nz), &PowerMap::constant(vec![nz / 2 - 1, nz / 2], 10e-3)).unwrap();
                (s.t_max - 300.0 - exact).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn adiabatic_box_rejected() {
        let a = BoundaryCondition::Adiabatic;
        let g = VoxelGrid::uniform([2, 2, 2], [1e-5; 3], silicon(), [a; 6]).unwrap();
        assert!(matches!(solve_steady(&g, &PowerMap::constant(vec![0], 1.0)), Err(Error::Physics(_))));
    }

    #[test]
    fn hotspot_ties_take_lowest_index() {
        let a = BoundaryCondition::Adiabatic;
        let f = BoundaryCondition::Fixed { temperature: 300.0 };
        let g = VoxelGrid::uniform([3, 1, 1], [1e-5; 3], silicon(), [f, f, a, a, a, a]).unwrap();
        let s = solve_steady(&g, &PowerMap::constant(vec![0, 2], 1e-3)).unwrap();
        assert!((s.temperature[0] - s.temperature[2]).abs() < 1e-12);
        assert_eq!(s.hotspot, if s.temperature[1] > s.temperature[0] { 1 } else { 0 });
    }

    #[test]
    fn transient_rc_step() {
        // one voxel, fixed bottom: tau = C / G
        let a = BoundaryCondition::Adiabatic;
        let f = BoundaryCondition::Fixed { temperature: 300.0 };
        let g = VoxelGrid::uniform([1, 1, 1], [1e-4; 3], silicon(), [a, a, a, a, f, a]).unwrap();
        let asm = assemble(&g).unwrap();
        let tau = asm.capacity[0] / asm.boundary_g[0];
        let p = 1e-3;
        let port = Port {
            name: "v".into(),
            voxels: vec![0],
        };
        let r = solve_transient(
            &g,
            &PowerMap::constant(vec![0], p),
            &[port],
            &TransientOptions {
                dt: tau / 100.0,
                t_end: 3.0 * tau,
                initial: None,
            },
        )
        .unwrap();
        let rise = p / asm.boundary_g[0];
        for (t, v) in r.times.iter().zip(&r.port_temperatures[0]).skip(1) {
            let exact = rise * (1.0 - (-t / tau).exp());
            assert!(((v - 300.0) - exact).abs() < 0.02 * exact, "{t}");
        }
    }

    #[test]
    fn transient_reaches_steady_state() {
        let g = rod(8);
        let p = PowerMap::constant(vec![3, 4], 1e-3);
        let steady = solve_steady(&g, &p).unwrap();
        let a = assemble(&g).unwrap();
        let tau = a.capacity.iter().sum::<f64>() / a.boundary_g.iter().sum::<f64>();
        let port = Port {
            name: "mid".into(),
            voxels: vec![3, 4],
        };
        let r = solve_transient(
            &g,
            &p,
            std::slice::from_ref(&port),
            &TransientOptions {
                dt: tau / 10.0,
                t_end: 50.0 * tau,
                initial: None,
            },
        )
        .unwrap();
        let want = steady.port_temperature(&g, &port);
        let got = *r.port_temperatures[0].last().unwrap();
        assert!(((got - 300.0) - (want - 300.0)).abs() < 1e-3 * (want - 300.0));
    }

    #[test]
    fn zero_power_transient_is_flat() {
        let g = rod(4);
        let port = Port {
            name: "a".into(),
            voxels: vec![1],
        };
        let r = solve_transient(
            &g,
            &PowerMap::default(),
            &[port],
            &TransientOptions {
                dt: 1e-4,
                t_end: 1e-2,
                initial: Some(300.0),
            },
        )
        .unwrap();
        assert!(r.port_temperatures[0].iter().all(|&t| t == 300.0));
    }
}
