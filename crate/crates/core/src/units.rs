//! Engineering-notation quantities.
//!
//! Accepted forms: plain numbers (`5.8e7`), SPICE scale suffixes (`10k`, `2.5u`,
//! `1meg`, case-insensitive, `m` is milli) and prefix + unit (`10um`, `1GHz`,
//! `10mW`, `3MHz`). When a unit name follows the prefix the prefix is
//! case-sensitive, so `MHz` is mega and `mW` is milli. Temperatures are plain
//! kelvin numbers; `300K` would read as 300 kilo.

use crate::error::{Error, Result};

const UNITS: &[&str] = &[
    "m", "hz", "w", "v", "a", "ohm", "ohms", "f", "h", "s", "j", "k", "sm", "s/m",
];

fn prefix_exact(c: char) -> Option<f64> {
    Some(match c {
        'f' => 1e-15,
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' | 'μ' => 1e-6,
        'm' => 1e-3,
        'k' | 'K' => 1e3,
        'M' => 1e6,
        'g' | 'G' => 1e9,
        'T' | 't' => 1e12,
        _ => return None,
    })
}

fn prefix_spice(c: char) -> Option<f64> {
    Some(match c.to_ascii_lowercase() {
        'f' => 1e-15,
        'p' => 1e-12,
        'n' => 1e-9,
        'u' => 1e-6,
        'µ' | 'μ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'g' => 1e9,
        't' => 1e12,
        _ => return None,
    })
}

fn is_unit(s: &str) -> bool {
    let l = s.to_ascii_lowercase();
    UNITS.contains(&l.as_str())
}

/// Splits `text` into its numeric head and suffix.
pub(crate) fn split_number(text: &str) -> Option<(&str, &str)> {
    let bytes = text.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    // exponent, only if followed by digits
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            i = j;
        }
    }
    Some((&text[..i], &text[i..]))
}

/// Parses an engineering-notation value into SI.
pub fn parse_quantity(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Input(format!("cannot parse quantity `{text}`"));
    let (num, suffix) = split_number(t).ok_or_else(bad)?;
    let value: f64 = num.parse().map_err(|_| bad())?;
    let scale = suffix_scale(suffix).ok_or_else(bad)?;
    let v = value * scale;
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn suffix_scale(suffix: &str) -> Option<f64> {
    if suffix.is_empty() {
        return Some(1.0);
    }
    let lower = suffix.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("meg") {
        return (rest.is_empty() || is_unit(rest)).then_some(1e6);
    }
    if lower.starts_with("mil") && (lower.len() == 3) {
        return Some(25.4e-6);
    }
    let mut chars = suffix.chars();
    let first = chars.next()?;
    let rest = chars.as_str();
    if rest.is_empty() {
        // bare SPICE scale factor, case-insensitive
        if let Some(s) = prefix_spice(first) {
            return Some(s);
        }
        return is_unit(suffix).then_some(1.0);
    }
    if is_unit(rest) {
        if let Some(s) = prefix_exact(first) {
            return Some(s);
        }
    }
    is_unit(suffix).then_some(1.0)
}

/// Formats a float losslessly in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:e}")
}
