//! Relaxation loop between the circuit and a thermal model.

use serde::Serialize;

use super::mna::{dc_solve_at, etherm_resistance, DcResult};
use super::netlist::{ElementKind, Netlist};
use crate::error::{Error, Result};
use crate::thermal::ThermalModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EthermOptions {
    /// Stop when the largest temperature update is below this, K.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Under-relaxation factor in (0, 1].
    pub relaxation: f64,
}

impl Default for EthermOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 50,
            relaxation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EthermState {
    pub devices: Vec<String>,
    /// K, per device.
    pub temperatures: Vec<f64>,
    /// W, per device, as passed to the thermal model in the last iteration.
    pub powers: Vec<f64>,
    /// W, per thermal port, the last thermal input.
    pub port_powers: Vec<f64>,
    /// Loop passes, each one circuit solve and one thermal solve.
    pub iterations: usize,
    pub converged: bool,
    /// Largest temperature update of each pass, K.
    pub history: Vec<f64>,
}

const GROWTH_LIMIT: usize = 5;

/// Gauss-Seidel coupling: circuit at the current temperatures, device powers
/// `V²/R`, thermal solve, relaxed temperature update. Temperatures start at
/// the thermal model's zero-power port values.
pub fn electro_thermal_solve(
    net: &Netlist,
    thermal: &dyn ThermalModel,
    opts: &EthermOptions,
) -> Result<(DcResult, EthermState)> {
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::Input("relaxation factor must lie in (0, 1]".into()));
    }
    let names = thermal.port_names();
    let devices: Vec<_> = net.etherm_devices();
    let mut binding = Vec::with_capacity(devices.len());
    for d in &devices {
        let ElementKind::Etherm { tport, .. } = &d.kind else { unreachable!() };
        let k = names.iter().position(|n| n == tport).ok_or_else(|| {
            Error::Reference(format!("device `{}` binds to unknown thermal port `{tport}`", d.name))
        })?;
        binding.push(k);
    }
    let ambient = thermal.steady_port_temperatures(&vec![0.0; names.len()])?;
    let mut temps: Vec<f64> = binding.iter().map(|&k| ambient[k]).collect();
    let mut history = Vec::new();
    let mut growth = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut last = None;
    while iterations < opts.max_iterations {
        iterations += 1;
        let dc = dc_solve_at(net, Some(&temps))?;
        let mut powers = Vec::with_capacity(devices.len());
        for (d, &t) in devices.iter().zip(&temps) {
            let ElementKind::Etherm { r0, t0, alpha, .. } = &d.kind else { unreachable!() };
            let r = etherm_resistance(&d.name, *r0, *t0, *alpha, t)?;
            let v = dc.voltages[d.nodes[0]] - dc.voltages[d.nodes[1]];
            powers.push(v * v / r);
        }
        let mut port_powers = vec![0.0; names.len()];
        for (&k, p) in binding.iter().zip(&powers) {
            port_powers[k] += p;
        }
        let port_t = thermal.steady_port_temperatures(&port_powers)?;
        let mut delta = 0.0f64;
        for (t, &k) in temps.iter_mut().zip(&binding) {
            let step = opts.relaxation * (port_t[k] - *t);
            delta = delta.max(step.abs());
            *t += step;
        }
        for (d, &t) in devices.iter().zip(&temps) {
            let ElementKind::Etherm { r0, t0, alpha, .. } = &d.kind else { unreachable!() };
            etherm_resistance(&d.name, *r0, *t0, *alpha, t)?;
        }
        if history.last().is_some_and(|&p| delta > p) {
            growth += 1;
        } else {
            growth = 0;
        }
        history.push(delta);
        last = Some((dc, powers, port_powers));
        if delta < opts.tolerance {
            converged = true;
            break;
        }
        if growth >= GROWTH_LIMIT {
            return Err(Error::Divergence(format!(
                "temperature update grew for {GROWTH_LIMIT} consecutive iterations (last {delta:.3e} K); \
                 try a relaxation factor below {}",
                opts.relaxation
            )));
        }
    }
    let (dc, powers, port_powers) = match last {
        Some(l) => l,
        None => return Err(Error::Input("max_iterations must be >= 1".into())),
    };
    Ok((
        dc,
        EthermState {
            devices: devices.iter().map(|d| d.name.clone()).collect(),
            temperatures: temps,
            powers,
            port_powers,
            iterations,
            converged,
            history,
        },
    ))
}
