//! Source-line-via-line-load chain evaluated by ABCD cascade.

use num_complex::Complex64;
use serde::Serialize;

use super::mna::line_abcd;
use super::netlist::{FreqTable, LineParams};
use crate::error::{Error, Result};

type Abcd = [[Complex64; 2]; 2];

fn mul(a: &Abcd, b: &Abcd) -> Abcd {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

fn series(z: Complex64) -> Abcd {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [[one, z], [zero, one]]
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViaElement {
    Short,
    Resistor(f64),
    Table(FreqTable),
}

impl ViaElement {
    fn resistance(&self, f: f64) -> Result<f64> {
        match self {
            ViaElement::Short => Ok(0.0),
            ViaElement::Resistor(r) => Ok(*r),
            ViaElement::Table(t) => t.eval("via", f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferChain {
    pub source_resistance: f64,
    pub line1: LineParams,
    pub via: ViaElement,
    pub line2: LineParams,
    pub load_resistance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferResult {
    pub frequencies: Vec<f64>,
    #[serde(skip)]
    pub h: Vec<Complex64>,
}

impl TransferResult {
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.h.iter().map(|h| 20.0 * h.norm().log10()).collect()
    }

    /// First frequency where |H| falls 3 dB below |H| at the first grid
    /// point, interpolated in log f; `None` if it never does.
    pub fn cutoff(&self) -> Option<f64> {
        let db = self.magnitude_db();
        let target = db[0] - 10.0 * 2f64.log10();
        for k in 1..db.len() {
            if db[k] < target {
                let (f0, f1) = (self.frequencies[k - 1], self.frequencies[k]);
                let s = (db[k - 1] - target) / (db[k - 1] - db[k]);
                if f0 <= 0.0 {
                    return Some(f0 + s * (f1 - f0));
                }
                return Some(f0 * (f1 / f0).powf(s));
            }
        }
        None
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,re_h,im_h,mag_db\n");
        for ((f, h), db) in self.frequencies.iter().zip(&self.h).zip(self.magnitude_db()) {
            s.push_str(&format!("{f:e},{:e},{:e},{db:e}\n", h.re, h.im));
        }
        s
    }
}

/// `H = V_load / V_source` for the terminated cascade, where `V_source` is
/// the open-circuit source voltage behind `Rs`.
pub fn transfer_function(chain: &TransferChain, frequencies: &[f64]) -> Result<TransferResult> {
    if !(chain.source_resistance >= 0.0) || !(chain.load_resistance > 0.0) {
        return Err(Error::Input("need Rs >= 0 and RL > 0".into()));
    }
    for l in [&chain.line1, &chain.line2] {
        if !(l.length >= 0.0) || [l.rpul, l.lpul, l.gpul, l.cpul].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Input("line parameters and lengths must be >= 0".into()));
        }
    }
    let (rs, rl) = (chain.source_resistance, chain.load_resistance);
    let mut h = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        let l = |p: &LineParams| line_abcd(p.rpul, p.lpul, p.gpul, p.cpul, p.length, f);
        let via = series(Complex64::new(chain.via.resistance(f)?, 0.0));
        let [[a, b], [c, d]] = mul(&mul(&l(&chain.line1), &via), &l(&chain.line2));
        h.push(1.0 / (a + b / rl + c * rs + d * rs / rl));
    }
    Ok(TransferResult {
        frequencies: frequencies.to_vec(),
        h,
    })
}
