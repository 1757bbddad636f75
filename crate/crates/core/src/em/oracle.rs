//! Exact AC/DC resistance ratio of an isolated round wire.
//!
//! With `k = (1 - j)/δ` the internal impedance of a wire of radius `a` is
//! `R_DC · (ka/2) · J0(ka)/J1(ka)`. The Bessel functions of this argument are
//! the Kelvin functions ber/bei and their derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::MU0;

/// Largest `a/δ` accepted by [`round_wire_oracle`].
pub const MAX_RADIUS_OVER_DEPTH: f64 = 50.0;
const SERIES_LIMIT: f64 = 10.0;

pub fn skin_depth(sigma: f64, frequency: f64) -> f64 {
    (1.0 / (PI * frequency * MU0 * sigma)).sqrt()
}

/// `R_AC / R_DC` for a round wire of `radius` at `frequency`.
pub fn round_wire_oracle(radius: f64, sigma: f64, frequency: f64) -> Result<f64> {
    if !(radius > 0.0 && sigma > 0.0 && frequency >= 0.0) || !(radius * sigma * frequency).is_finite() {
        return Err(Error::Domain(format!(
            "round-wire oracle needs radius, sigma > 0 and frequency >= 0 (got {radius}, {sigma}, {frequency})"
        )));
    }
    if frequency == 0.0 {
        return Ok(1.0);
    }
    ratio_from_x(radius / skin_depth(sigma, frequency))
}

/// Ratio as a function of `x = a/δ`.
pub fn ratio_from_x(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x > MAX_RADIUS_OVER_DEPTH {
        return Err(Error::Domain(format!(
            "a/delta = {x} is outside the oracle range [0, {MAX_RADIUS_OVER_DEPTH}]"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x <= SERIES_LIMIT {
        kelvin_series_ratio(x)
    } else {
        continued_fraction_ratio(x)
    }
}

/// Power series of J0 and J1 at `z = (1 - j)x`.
pub fn kelvin_series_ratio(x: f64) -> Result<f64> {
    let z = Complex64::new(x, -x);
    // (z/2)^2 = -j x^2 / 2
    let q = Complex64::new(0.0, -0.5 * x * x);
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = 0.5 * z;
    let (mut j0, mut j1) = (t0, t1);
    let mut k = 1.0;
    loop {
        t0 *= -q / (k * k);
        t1 *= -q / (k * (k + 1.0));
        j0 += t0;
        j1 += t1;
        if t0.norm() <= 1e-17 * j0.norm() && t1.norm() <= 1e-17 * j1.norm() {
            break;
        }
        k += 1.0;
        if k > 400.0 {
            return Err(Error::Domain(format!("Kelvin series did not converge at a/delta = {x}")));
        }
    }
    Ok((0.5 * z * j0 / j1).re)
}

/// Continued fraction `J1(z)/J0(z) = 1/(2/z - 1/(4/z - 1/(6/z - ...)))`,
/// evaluated from a deep tail upward and deepened until it settles.
pub fn continued_fraction_ratio(x: f64) -> Result<f64> {
    let z = Complex64::new(x, -x);
    let inv_z = z.inv();
    let eval = |depth: usize| {
        let mut r = Complex64::new(0.0, 0.0);
        for n in (1..=depth).rev() {
            r = (2.0 * n as f64 * inv_z - r).inv();
        }
        r
    };
    let mut depth = (2.0 * z.norm()) as usize + 32;
    let mut prev = eval(depth);
    for _ in 0..12 {
        depth *= 2;
        let next = eval(depth);
        if (next - prev).norm() <= 1e-15 * next.norm() {
            return Ok((0.5 * z / next).re);
        }
        prev = next;
    }
    Err(Error::Domain(format!(
        "continued fraction did not converge at a/delta = {x}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_limit() {
        assert_eq!(ratio_from_x(0.0).unwrap(), 1.0);
        assert!((ratio_from_x(1e-3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(round_wire_oracle(5e-6, 5.8e7, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn small_argument_expansion() {
        let x: f64 = 0.5;
        let approx = 1.0 + x.powi(4) / 48.0 - x.powi(8) / 2880.0;
        assert!((ratio_from_x(x).unwrap() - approx).abs() < 1e-7);
        assert!((ratio_from_x(x).unwrap() - 1.0013).abs() < 1e-4);
    }

    #[test]
    fn large_argument_asymptote() {
        for x in [10.0, 20.0, 50.0] {
            let asym = x / 2.0 + 0.25 + 3.0 / (32.0 * x);
            assert!((ratio_from_x(x).unwrap() / asym - 1.0).abs() < 1e-4, "{x}");
        }
        assert!((ratio_from_x(10.0).unwrap() - 5.26).abs() < 0.005);
    }

    #[test]
    fn routes_agree_in_overlap() {
        for x in [0.3, 1.0, 2.5, 4.0, 7.0, 10.0] {
            let a = kelvin_series_ratio(x).unwrap();
            let b = continued_fraction_ratio(x).unwrap();
            assert!((a / b - 1.0).abs() < 1e-10, "{x}: {a} {b}");
        }
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(ratio_from_x(50.5), Err(Error::Domain(_))));
        assert!(round_wire_oracle(-1.0, 1.0, 1.0).is_err());
    }
}
