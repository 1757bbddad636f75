//! Table fits for behavioural models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    PiecewiseLogLinear,
    Rational { num: usize, den: usize },
}

/// Evaluation clamps `x` to the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitModel {
    /// Linear in `(ln x, y)` between knots. A segment starting at `x ≤ 0`
    /// is linear in `x` instead.
    PiecewiseLogLinear { x: Vec<f64>, y: Vec<f64> },
    /// `P(x/scale) / Q(x/scale)` with `Q(0) = 1`; `den[0]` is that unit term.
    Rational {
        num: Vec<f64>,
        den: Vec<f64>,
        scale: f64,
        range: (f64, f64),
    },
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

impl FitModel {
    pub fn kind(&self) -> FitKind {
        match self {
            FitModel::PiecewiseLogLinear { .. } => FitKind::PiecewiseLogLinear,
            FitModel::Rational { num, den, .. } => FitKind::Rational {
                num: num.len() - 1,
                den: den.len() - 1,
            },
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match self {
            FitModel::PiecewiseLogLinear { x, .. } => (x[0], x[x.len() - 1]),
            FitModel::Rational { range, .. } => *range,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        let x = x.clamp(lo, hi);
        match self {
            FitModel::PiecewiseLogLinear { x: xs, y } => {
                let k = xs.partition_point(|&v| v <= x);
                if k == 0 {
                    return y[0];
                }
                if k == xs.len() {
                    return y[k - 1];
                }
                let (x0, x1) = (xs[k - 1], xs[k]);
                if x == x0 {
                    return y[k - 1];
                }
                let s = if x0 > 0.0 {
                    (x / x0).ln() / (x1 / x0).ln()
                } else {
                    (x - x0) / (x1 - x0)
                };
                y[k - 1] + s * (y[k] - y[k - 1])
            }
            FitModel::Rational { num, den, scale, .. } => {
                let t = x / scale;
                poly(num, t) / poly(den, t)
            }
        }
    }
}

/// Fits `samples` (x strictly increasing). The rational kind is a weighted
/// linearized least-squares fit refined by Sanathanan-Koerner iterations.
pub fn fit_table(samples: &[(f64, f64)], kind: FitKind) -> Result<FitModel> {
    if samples.len() < 2 {
        return Err(Error::Input("a fit needs at least two samples".into()));
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Input("samples must be finite".into()));
    }
    for w in samples.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Input(format!("duplicate sample at x = {}", w[0].0)));
        }
        if w[1].0 < w[0].0 {
            return Err(Error::Input("sample x values must be strictly increasing".into()));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    match kind {
        FitKind::PiecewiseLogLinear => {
            if xs[1..].iter().any(|&x| x <= 0.0) {
                return Err(Error::Input("log-linear fit needs positive x beyond the first knot".into()));
            }
            Ok(FitModel::PiecewiseLogLinear { x: xs, y: ys })
        }
        FitKind::Rational { num, den } => rational(&xs, &ys, num, den),
    }
}

fn rational(xs: &[f64], ys: &[f64], nd: usize, dd: usize) -> Result<FitModel> {
    let unknowns = nd + 1 + dd;
    if unknowns > xs.len() {
        return Err(Error::Input(format!(
            "rational fit with {unknowns} coefficients needs as many samples"
        )));
    }
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let ts: Vec<f64> = xs.iter().map(|x| x / scale).collect();
    let mut den = vec![0.0; dd + 1];
    den[0] = 1.0;
    let mut num = vec![0.0; nd + 1];
    let iterations = if dd == 0 { 1 } else { 30 };
    for _ in 0..iterations {
        let rows = xs.len();
        let mut a = DMatrix::zeros(rows, unknowns);
        let mut rhs = DVector::zeros(rows);
        for (r, (&t, &y)) in ts.iter().zip(ys).enumerate() {
            let w = 1.0 / poly(&den, t).abs().max(1e-300);
            let mut tp = 1.0;
            for c in 0..=nd {
                a[(r, c)] = w * tp;
                tp *= t;
            }
            let mut tp = t;
            for c in 0..dd {
                a[(r, nd + 1 + c)] = -w * y * tp;
                tp *= t;
            }
            rhs[r] = w * y;
        }
        let sol = a
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Input(format!("rational fit failed: {e}")))?;
        let new_den: Vec<f64> = std::iter::once(1.0).chain(sol.iter().skip(nd + 1).copied()).collect();
        let change = new_den
            .iter()
            .zip(&den)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        num = sol.iter().take(nd + 1).copied().collect();
        den = new_den;
        if change < 1e-13 {
            break;
        }
    }
    if num.iter().chain(&den).any(|v| !v.is_finite()) {
        return Err(Error::Input("rational fit produced non-finite coefficients".into()));
    }
    Ok(FitModel::Rational {
        num,
        den,
        scale,
        range: (xs[0], xs[xs.len() - 1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_linear_recovers_knots() {
        let s: Vec<(f64, f64)> = [0.0, 1e6, 1e7, 1e8, 1e9].iter().map(|&f| (f, 1.0 + (f / 1e8f64).sqrt())).collect();
        let m = fit_table(&s, FitKind::PiecewiseLogLinear).unwrap();
        for &(x, y) in &s {
            assert_eq!(m.eval(x), y);
        }
        assert_eq!(m.eval(-5.0), s[0].1);
        assert_eq!(m.eval(1e12), s[4].1);
    }

    #[test]
    fn two_point_line_in_log_x() {
        let m = fit_table(&[(10.0, 1.0), (1000.0, 5.0)], FitKind::PiecewiseLogLinear).unwrap();
        assert!((m.eval(100.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rational_recovers_rational_data() {
        let f = |x: f64| (2.0 + 0.5 * x) / (1.0 + 0.1 * x + 0.02 * x * x);
        let s: Vec<(f64, f64)> = (0..30).map(|i| i as f64 * 0.5).map(|x| (x, f(x))).collect();
        let m = fit_table(&s, FitKind::Rational { num: 1, den: 2 }).unwrap();
        for x in [0.3, 2.2, 9.7, 14.5] {
            assert!((m.eval(x) - f(x)).abs() < 1e-9 * f(x).abs());
        }
        assert_eq!(m.kind(), FitKind::Rational { num: 1, den: 2 });
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(fit_table(&[(1.0, 1.0)], FitKind::PiecewiseLogLinear).is_err());
        assert!(fit_table(&[(1.0, 1.0), (1.0, 2.0)], FitKind::PiecewiseLogLinear).is_err());
        assert!(fit_table(&[(2.0, 1.0), (1.0, 2.0)], FitKind::PiecewiseLogLinear).is_err());
        assert!(fit_table(&[(1.0, 1.0), (2.0, 2.0)], FitKind::Rational { num: 2, den: 1 }).is_err());
    }
}
