//! Deterministic SVG line plots and cell maps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::export::escape;

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(headers: Vec<String>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rd
            .headers()
            .map_err(|e| Error::Input(format!("CSV header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(format!("CSV row {}: {e}", k + 2)))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Input(format!("CSV row {}: `{f}` is not a number", k + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    /// Full-precision scientific notation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}"))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r.get(k).copied().unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotStyle {
    pub title: String,
    /// x column header.
    pub x: String,
    /// y column headers, one series each; empty plots every other column.
    #[serde(default)]
    pub y: Vec<String>,
    #[serde(default)]
    pub x_label: String,
    #[serde(default)]
    pub y_label: String,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
}

fn default_width() -> u32 {
    720
}

fn default_height() -> u32 {
    440
}

impl PlotStyle {
    pub fn new(title: &str, x: &str) -> Self {
        Self {
            title: title.into(),
            x: x.into(),
            y: Vec::new(),
            x_label: x.into(),
            y_label: String::new(),
            log_x: false,
            log_y: false,
            width: default_width(),
            height: default_height(),
        }
    }
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MARGIN: [f64; 4] = [70.0, 170.0, 40.0, 50.0];

/// Axis mapping plus gridline positions.
struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Err(Error::Input("no plottable values on an axis".into()));
        }
        if log {
            let (a, b) = (lo.log10().floor(), hi.log10().ceil());
            let b = if b == a { a + 1.0 } else { b };
            let ticks = (a as i32..=b as i32).map(|e| 10f64.powi(e)).collect();
            return Ok(Self { log, lo: 10f64.powf(a), hi: 10f64.powf(b), ticks });
        }
        if hi == lo {
            let d = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            lo -= d;
            hi += d;
        }
        let step = nice_step((hi - lo) / 6.0);
        let (a, b) = ((lo / step).floor(), (hi / step).ceil());
        let ticks = (a as i64..=b as i64).map(|k| k as f64 * step).collect();
        Ok(Self { log, lo: a * step, hi: b * step, ticks })
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn label(&self, v: f64) -> String {
        if self.log {
            return format!("1e{}", v.log10().round() as i32);
        }
        let step = self.ticks.get(1).map_or(1.0, |t| t - self.ticks[0]);
        if v == 0.0 {
            return "0".into();
        }
        let mag = v.abs().log10().floor();
        if (-3.0..4.0).contains(&mag) {
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            format!("{v:.decimals$}")
        } else {
            let digits = (mag - step.log10().floor()).max(0.0) as usize;
            format!("{v:.digits$e}")
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let e = raw.log10().floor();
    let base = 10f64.powf(e);
    let m = raw / base;
    let nice = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * base
}

/// Line plot of the style's y columns over its x column. Gridlines are
/// `<line>` elements; each series is one `<polyline>`.
pub fn emit_plot(table: &CsvTable, style: &PlotStyle) -> Result<String> {
    let x = table
        .column(&style.x)
        .ok_or_else(|| Error::Input(format!("no column `{}`", style.x)))?;
    let names: Vec<String> = if style.y.is_empty() {
        table.headers.iter().filter(|h| **h != style.x).cloned().collect()
    } else {
        style.y.clone()
    };
    if names.is_empty() || x.is_empty() {
        return Err(Error::Input("plot needs at least one non-empty series".into()));
    }
    let mut series = Vec::with_capacity(names.len());
    for n in &names {
        let y = table.column(n).ok_or_else(|| Error::Input(format!("no column `{n}`")))?;
        series.push((n.clone(), y));
    }
    let ok = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
    let xa = Axis::new(x.iter().copied(), style.log_x)?;
    let ya = Axis::new(
        series
            .iter()
            .flat_map(|(_, y)| y.iter().zip(&x).filter(|(_, xv)| ok(**xv, style.log_x)).map(|(v, _)| *v)),
        style.log_y,
    )?;
    let (w, h) = (style.width as f64, style.height as f64);
    let [ml, mr, mt, mb] = MARGIN;
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let px = |v: f64| ml + xa.frac(v) * pw;
    let py = |v: f64| mt + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="11">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        ml + 0.5 * pw,
        escape(&style.title)
    );
    for &t in &xa.ticks {
        let p = px(t);
        let _ = writeln!(
            s,
            r##"<line class="grid" x1="{p:.2}" y1="{mt:.2}" x2="{p:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            mt + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{p:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph + 15.0,
            xa.label(t)
        );
    }
    for &t in &ya.ticks {
        let p = py(t);
        let _ = writeln!(
            s,
            r##"<line class="grid" x1="{ml:.2}" y1="{p:.2}" x2="{:.2}" y2="{p:.2}" stroke="#dddddd"/>"##,
            ml + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 5.0,
            p + 4.0,
            ya.label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{ml:.2}" y="{mt:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + 0.5 * pw,
        h - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        mt + 0.5 * ph,
        mt + 0.5 * ph,
        escape(&style.y_label)
    );
    for (k, (name, y)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(y)
            .filter(|(xv, yv)| ok(**xv, style.log_x) && ok(**yv, style.log_y))
            .map(|(xv, yv)| format!("{:.2},{:.2}", px(*xv), py(*yv)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = mt + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="14" height="3" fill="{color}"/>"#,
            ml + pw + 10.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, ml + pw + 30.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Cell map on an `nx × ny` grid, row 0 at the bottom. `cells` holds
/// `(iy·nx + ix, value)`; values are shaded relative to the largest.
pub fn emit_cell_map(nx: usize, ny: usize, cells: &[(usize, f64)], title: &str) -> Result<String> {
    if cells.is_empty() || nx == 0 || ny == 0 {
        return Err(Error::Input("cell map needs cells".into()));
    }
    let max = cells.iter().map(|c| c.1).fold(0.0f64, f64::max);
    let px = (480.0 / nx.max(ny) as f64).max(1.0);
    let (w, h) = (nx as f64 * px, ny as f64 * px);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {w:.2} {:.2}" font-family="sans-serif" font-size="11">"#,
        w,
        h + 40.0,
        h + 40.0
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w:.2}" height="{:.2}" fill="white"/>"#, h + 40.0);
    for &(idx, v) in cells {
        let (ix, iy) = (idx % nx, idx / nx);
        let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
        let (r, g, b) = heat(t);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{px:.2}" height="{px:.2}" fill="rgb({r},{g},{b})"/>"#,
            ix as f64 * px,
            (ny - 1 - iy) as f64 * px
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.2}">{} (max {max:.4e})</text>"#,
        h + 25.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn heat(t: f64) -> (u8, u8, u8) {
    let r = (255.0 * (1.5 * t).min(1.0)) as u8;
    let g = (255.0 * (1.5 * t - 0.5).clamp(0.0, 1.0)) as u8;
    let b = (255.0 * (0.4 + 0.6 * t - 1.2 * t * t).clamp(0.0, 1.0)) as u8;
    (r, g, b)
}
