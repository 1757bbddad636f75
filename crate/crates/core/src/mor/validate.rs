//! Accuracy report for a reduced model against its full system.

use serde::Serialize;

use super::system::{RcSystem, ReducedModel, StateSpaceRC};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    /// Inputs switch to `amplitudes` at t = 0.
    Step { amplitudes: Vec<f64> },
    /// `u_k(t) = a_k sin(2π f t)`.
    Sinusoid { amplitudes: Vec<f64>, frequency: f64 },
}

impl Stimulus {
    fn amplitudes(&self) -> &[f64] {
        match self {
            Stimulus::Step { amplitudes } | Stimulus::Sinusoid { amplitudes, .. } => amplitudes,
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            Stimulus::Step { amplitudes } => amplitudes.clone(),
            Stimulus::Sinusoid { amplitudes, frequency } => {
                let s = (2.0 * std::f64::consts::PI * frequency * t).sin();
                amplitudes.iter().map(|a| a * s).collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub stimulus: Stimulus,
    pub t_end: f64,
    pub steps: usize,
    /// Frequencies for the response comparison; empty picks a log grid
    /// between `0.1 / (2π t_end)` and `1 / (2π dt)`.
    pub frequencies: Vec<f64>,
    pub frequency_points: usize,
}

impl ValidationOptions {
    pub fn step(amplitudes: Vec<f64>, t_end: f64, steps: usize) -> Self {
        Self {
            stimulus: Stimulus::Step { amplitudes },
            t_end,
            steps,
            frequencies: Vec::new(),
            frequency_points: 8,
        }
    }

    fn grid(&self) -> Vec<f64> {
        if !self.frequencies.is_empty() {
            return self.frequencies.clone();
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let lo = 0.1 / (two_pi * self.t_end);
        let hi = self.steps as f64 / (two_pi * self.t_end);
        let k = self.frequency_points.max(2);
        (0..k)
            .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub order: usize,
    /// Max over time and outputs of `|y_full − y_red|`, relative to the peak
    /// `|y_full|` over the same horizon.
    pub max_relative_error: f64,
    pub rms_relative_error: f64,
    /// Max over the grid of `max|H_full − H_red| / max|H_full|` per frequency.
    pub frequency_error: f64,
    pub frequencies: Vec<f64>,
    pub frequency_errors: Vec<f64>,
    pub dc_gain_error: f64,
}

/// Compares time and frequency responses. Both systems use the same
/// backward-Euler grid so integration error cancels in the comparison.
pub fn validate_reduction(
    full: &StateSpaceRC,
    red: &ReducedModel,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    if full.inputs() != red.inputs() || full.outputs() != red.outputs() {
        return Err(Error::Input(format!(
            "port counts differ: full {}→{}, reduced {}→{}",
            full.inputs(),
            full.outputs(),
            red.inputs(),
            red.outputs()
        )));
    }
    if opts.stimulus.amplitudes().len() != full.inputs() {
        return Err(Error::Input("stimulus amplitude count differs from inputs".into()));
    }
    if !(opts.t_end > 0.0) || opts.steps == 0 {
        return Err(Error::Input("validation horizon must be positive".into()));
    }
    let dt = opts.t_end / opts.steps as f64;
    let u = |t: f64| opts.stimulus.at(t);
    let yf = full.simulate(&u, dt, opts.steps)?;
    let yr = red.simulate(&u, dt, opts.steps)?;
    let (max_rel, rms_rel) = response_error(&yf, &yr);

    let frequencies = opts.grid();
    let mut frequency_errors = Vec::with_capacity(frequencies.len());
    for &f in &frequencies {
        let a = full.transfer(f)?;
        let b = red.transfer(f)?;
        let scale = a.map(|z| z.norm()).amax();
        let d = (&a - &b).map(|z| z.norm()).amax();
        frequency_errors.push(if scale > 0.0 { d / scale } else { d });
    }
    let gf = full.dc_gain()?;
    let gr = red.dc_gain()?;
    let scale = gf.amax();
    let dc = (&gf - &gr).amax() / if scale > 0.0 { scale } else { 1.0 };
    Ok(ValidationReport {
        order: red.order(),
        max_relative_error: max_rel,
        rms_relative_error: rms_rel,
        frequency_error: frequency_errors.iter().cloned().fold(0.0, f64::max),
        frequencies,
        frequency_errors,
        dc_gain_error: dc,
    })
}

/// `(max, rms)` of the pointwise difference, both relative to the peak of `reference`.
pub fn response_error(reference: &[Vec<f64>], other: &[Vec<f64>]) -> (f64, f64) {
    let peak = reference
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (a, b) in reference.iter().zip(other) {
        for (x, y) in a.iter().zip(b) {
            let d = (x - y).abs();
            max = max.max(d);
            sq += d * d;
            count += 1;
        }
    }
    let scale = if peak > 0.0 { peak } else { 1.0 };
    (max / scale, (sq / count.max(1) as f64).sqrt() / scale)
}
