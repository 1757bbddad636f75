//! Plain-text form of a reduced model: a header followed by dense `G`, `C`,
//! `B`, `L` blocks in row-major order, numbers in shortest round-trip form.
//!
//! ```text
//! viaflow-reduced 1
//! order 2
//! inputs 1
//! outputs 1
//! ports p0
//! offset 3e2
//! G
//! 1e0 -2e-1
//! -2e-1 5e-1
//! C
//! ...
//! ```

use std::fmt::Write;

use nalgebra::DMatrix;

use super::system::ReducedModel;
use crate::error::{Error, Location, Result};

const MAGIC: &str = "viaflow-reduced 1";

fn block(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name}");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn write_reduced(model: &ReducedModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "order {}", model.g.nrows());
    let _ = writeln!(s, "inputs {}", model.b.ncols());
    let _ = writeln!(s, "outputs {}", model.l.ncols());
    let names: Vec<String> = model
        .port_names
        .iter()
        .map(|n| n.split_whitespace().collect::<Vec<_>>().join("_"))
        .collect();
    let _ = writeln!(s, "ports {}", names.join(" "));
    let off: Vec<String> = model.output_offset.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(s, "offset {}", off.join(" "));
    block(&mut s, "G", &model.g);
    block(&mut s, "C", &model.c);
    block(&mut s, "B", &model.b);
    block(&mut s, "L", &model.l);
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            message: message.into(),
            location: Location {
                line: self.line,
                column: 1,
            },
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        loop {
            match self.it.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let l = l.trim();
                    if !l.is_empty() && !l.starts_with('#') {
                        return Ok(l);
                    }
                }
                None => {
                    self.line += 1;
                    return Err(self.err("unexpected end of reduced model"));
                }
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        match v.as_slice() {
            [n] => n.parse().map_err(|_| self.err(format!("bad `{key}` value"))),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn numbers(&self, parts: &[&str], expect: usize) -> Result<Vec<f64>> {
        if parts.len() != expect {
            return Err(self.err(format!("expected {expect} numbers, found {}", parts.len())));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("bad number `{p}`")))
            })
            .collect()
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if self.next()? != name {
            return Err(self.err(format!("expected block `{name}`")));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            let l = self.next()?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            let v = self.numbers(&parts, cols)?;
            for (c, x) in v.into_iter().enumerate() {
                m[(r, c)] = x;
            }
        }
        Ok(m)
    }
}

pub fn read_reduced(text: &str) -> Result<ReducedModel> {
    let mut p = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    if p.next()? != MAGIC {
        return Err(p.err("not a reduced model file"));
    }
    let q = p.count("order")?;
    let m = p.count("inputs")?;
    let o = p.count("outputs")?;
    let names = p.keyed("ports")?;
    if names.len() != o {
        return Err(p.err(format!("{} port names for {o} outputs", names.len())));
    }
    let names: Vec<String> = names.into_iter().map(String::from).collect();
    let off = p.keyed("offset")?;
    let offset = p.numbers(&off, o)?;
    let g = p.matrix("G", q, q)?;
    let c = p.matrix("C", q, q)?;
    let b = p.matrix("B", q, m)?;
    let l = p.matrix("L", q, o)?;
    let line = p.line;
    let mut model = ReducedModel::new(g, c, b, l).map_err(|e| Error::Parse {
        message: e.to_string(),
        location: Location { line, column: 1 },
    })?;
    model.port_names = names;
    model.output_offset = offset;
    Ok(model)
}
