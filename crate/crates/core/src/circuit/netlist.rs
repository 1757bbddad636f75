//! Circuit data model and the SPICE-like netlist reader.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Location, Result};
use crate::mor::{read_reduced, FitKind, FitModel, RcSystem, ReducedModel};
use crate::units::parse_quantity;

/// Node index of ground.
pub const GROUND: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeWave {
    /// `v0` up to and including `delay`, `v1` after.
    Step { v0: f64, v1: f64, delay: f64 },
    Sin {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        delay: f64,
    },
    /// Linear between points, held constant outside.
    Pwl(Vec<(f64, f64)>),
}

impl TimeWave {
    /// Time of a jump discontinuity, if any.
    pub fn jump(&self) -> Option<f64> {
        match self {
            TimeWave::Step { v0, v1, delay } if v0 != v1 => Some(*delay),
            _ => None,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            TimeWave::Step { v0, v1, delay } => {
                if t <= *delay {
                    *v0
                } else {
                    *v1
                }
            }
            TimeWave::Sin {
                offset,
                amplitude,
                frequency,
                delay,
            } => {
                if t <= *delay {
                    *offset
                } else {
                    offset + amplitude * (2.0 * std::f64::consts::PI * frequency * (t - delay)).sin()
                }
            }
            TimeWave::Pwl(p) => {
                if t <= p[0].0 {
                    return p[0].1;
                }
                for w in p.windows(2) {
                    if t <= w[1].0 {
                        let s = (t - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + s * (w[1].1 - w[0].1);
                    }
                }
                p[p.len() - 1].1
            }
        }
    }
}

/// Independent source value: DC level, AC phasor and optional time waveform.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Source {
    pub dc: f64,
    pub ac: Complex64,
    pub wave: Option<TimeWave>,
}

impl Source {
    pub fn dc(value: f64) -> Self {
        Self {
            dc: value,
            ..Default::default()
        }
    }

    pub fn ac(magnitude: f64) -> Self {
        Self {
            ac: Complex64::new(magnitude, 0.0),
            ..Default::default()
        }
    }

    /// Value at time `t`; the DC level without a waveform.
    pub fn at(&self, t: f64) -> f64 {
        self.wave.as_ref().map_or(self.dc, |w| w.at(t))
    }
}

/// Frequency-dependent resistance table, log-f linear between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqTable {
    fit: FitModel,
    /// Hold end values outside the table instead of failing.
    pub clamp: bool,
}

impl FreqTable {
    pub fn new(points: &[(f64, f64)], clamp: bool) -> Result<Self> {
        if points.iter().any(|&(f, r)| !(f >= 0.0) || !(r > 0.0)) {
            return Err(Error::Input(
                "resistance tables need non-negative frequencies and positive resistances".into(),
            ));
        }
        let fit = fit_table_input(points)?;
        Ok(Self { fit, clamp })
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        match &self.fit {
            FitModel::PiecewiseLogLinear { x, y } => x.iter().copied().zip(y.iter().copied()).collect(),
            FitModel::Rational { .. } => unreachable!(),
        }
    }

    /// Value used for DC analyses: the first entry.
    pub fn dc_value(&self) -> f64 {
        self.fit.eval(f64::NEG_INFINITY)
    }

    pub fn eval(&self, element: &str, f: f64) -> Result<f64> {
        let (lo, hi) = self.fit.range();
        if !self.clamp && (f < lo || f > hi) {
            return Err(Error::Range(format!(
                "{element}: frequency {f:e} Hz outside table [{lo:e}, {hi:e}]; enable clamping to hold end values"
            )));
        }
        Ok(self.fit.eval(f))
    }
}

fn fit_table_input(points: &[(f64, f64)]) -> Result<FitModel> {
    crate::mor::fit_table(points, FitKind::PiecewiseLogLinear)
}

/// Per-unit-length line parameters (Ω/m, H/m, S/m, F/m) and length (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub rpul: f64,
    pub lpul: f64,
    pub gpul: f64,
    pub cpul: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Resistor { r: f64 },
    /// `ic` is the initial voltage used with `Initial::Uic`.
    Capacitor { c: f64, ic: Option<f64> },
    Inductor { l: f64, ic: Option<f64> },
    /// Nodes `[+, −]`; the branch current flows from + through the source to −.
    VSource(Source),
    /// Nodes `[+, −]`; drives current from + through the source to −.
    ISource(Source),
    /// Nodes `[+, −, c+, c−]`.
    Vccs { gm: f64 },
    Vcvs { gain: f64 },
    /// Nodes `[+, −]`; `gain · i(control)` flows from + through the source to −.
    Cccs { control: String, gain: f64 },
    FreqResistor { table: FreqTable },
    /// Nodes `[n1, ref1, n2, ref2]`.
    TLine(LineParams),
    /// Nodes are the ports, referenced to ground.
    Block { model: Arc<ReducedModel>, source: String },
    /// Resistance `r0·(1 + α(T − t0))` with T from thermal port `tport`.
    Etherm { r0: f64, t0: f64, alpha: f64, tport: String },
    /// No nodes; couples inductors `l1` and `l2` with `M = k·√(L1·L2)`.
    Mutual { l1: String, l2: String, k: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub nodes: Vec<usize>,
    pub kind: ElementKind,
}

impl Element {
    pub fn is_etherm(&self) -> bool {
        matches!(self.kind, ElementKind::Etherm { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub title: String,
    node_names: Vec<String>,
    node_index: BTreeMap<String, usize>,
    elements: Vec<Element>,
    /// Lowercased element name → position.
    element_index: BTreeMap<String, usize>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

fn is_ground(name: &str) -> bool {
    name == "0" || name.eq_ignore_ascii_case("gnd")
}

impl Netlist {
    pub fn new() -> Self {
        let mut node_index = BTreeMap::new();
        node_index.insert("0".to_string(), GROUND);
        Self {
            title: String::new(),
            node_names: vec!["0".into()],
            node_index,
            elements: Vec::new(),
            element_index: BTreeMap::new(),
        }
    }

    /// Index of `name`, creating the node if needed.
    pub fn node(&mut self, name: &str) -> usize {
        if is_ground(name) {
            return GROUND;
        }
        if let Some(&i) = self.node_index.get(name) {
            return i;
        }
        let i = self.node_names.len();
        self.node_names.push(name.to_string());
        self.node_index.insert(name.to_string(), i);
        i
    }

    pub fn find_node(&self, name: &str) -> Option<usize> {
        if is_ground(name) {
            return Some(GROUND);
        }
        self.node_index.get(name).copied()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    /// Node count including ground.
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.element_index
            .get(&name.to_ascii_lowercase())
            .map(|&i| &self.elements[i])
    }

    /// Adds an element, creating its nodes. Names must be unique
    /// (case-insensitive).
    pub fn add(&mut self, name: &str, nodes: &[&str], kind: ElementKind) -> Result<()> {
        if self.element(name).is_some() {
            return Err(Error::Input(format!("duplicate element name `{name}`")));
        }
        let want = match &kind {
            ElementKind::Vccs { .. } | ElementKind::Vcvs { .. } | ElementKind::TLine(_) => 4,
            ElementKind::Block { model, .. } => model.outputs(),
            ElementKind::Mutual { .. } => 0,
            _ => 2,
        };
        if want != nodes.len() {
            return Err(Error::Input(format!(
                "element `{name}` needs {want} nodes, got {}",
                nodes.len()
            )));
        }
        validate_kind(name, &kind)?;
        let nodes = nodes.iter().map(|n| self.node(n)).collect();
        self.element_index.insert(name.to_ascii_lowercase(), self.elements.len());
        self.elements.push(Element {
            name: name.to_string(),
            nodes,
            kind,
        });
        Ok(())
    }

    /// Etherm devices in element order.
    pub fn etherm_devices(&self) -> Vec<&Element> {
        self.elements.iter().filter(|e| e.is_etherm()).collect()
    }

    /// Checks cross references: current-controlled sources name a voltage
    /// source and couplings name two inductors.
    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            if let ElementKind::Mutual { l1, l2, .. } = &e.kind {
                for l in [l1, l2] {
                    if !matches!(self.element(l), Some(Element { kind: ElementKind::Inductor { .. }, .. })) {
                        return Err(Error::Reference(format!("`{}` couples `{l}`, which is not an inductor", e.name)));
                    }
                }
                if l1.eq_ignore_ascii_case(l2) {
                    return Err(Error::Input(format!("`{}` couples `{l1}` with itself", e.name)));
                }
            }
            if let ElementKind::Cccs { control, .. } = &e.kind {
                match self.element(control) {
                    Some(Element {
                        kind: ElementKind::VSource(_),
                        ..
                    }) => {}
                    _ => {
                        return Err(Error::Reference(format!(
                            "`{}` is controlled by `{control}`, which is not a voltage source",
                            e.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_kind(name: &str, kind: &ElementKind) -> Result<()> {
    let bad = |what: &str| Err(Error::Input(format!("element `{name}`: {what}")));
    match kind {
        ElementKind::Resistor { r } if !(r.is_finite() && *r != 0.0) => bad("resistance must be finite and nonzero"),
        ElementKind::Capacitor { c, .. } if !(*c >= 0.0 && c.is_finite()) => bad("capacitance must be >= 0"),
        ElementKind::Inductor { l, .. } if !(*l > 0.0 && l.is_finite()) => bad("inductance must be > 0"),
        ElementKind::TLine(p) => {
            if !(p.length > 0.0) {
                return bad("line length must be > 0");
            }
            if [p.rpul, p.lpul, p.gpul, p.cpul].iter().any(|v| !(*v >= 0.0)) {
                return bad("line parameters must be >= 0");
            }
            if p.lpul == 0.0 && p.rpul == 0.0 {
                return bad("line needs R' or L' > 0");
            }
            Ok(())
        }
        ElementKind::Block { model, .. } if model.inputs() != model.outputs() => {
            bad("reduced block needs as many inputs as outputs")
        }
        ElementKind::Etherm { r0, .. } if !(*r0 > 0.0) => bad("r0 must be > 0"),
        ElementKind::Mutual { k, .. } if !(k.abs() <= 1.0) => bad("coupling coefficient must lie in [-1, 1]"),
        _ => Ok(()),
    }
}

/// Named tables and reduced models that `table=` / `model=` may reference
/// before falling back to files relative to `base_dir`.
#[derive(Debug, Clone, Default)]
pub struct NetlistContext {
    pub base_dir: Option<PathBuf>,
    pub tables: BTreeMap<String, Vec<(f64, f64)>>,
    pub models: BTreeMap<String, Arc<ReducedModel>>,
}

impl NetlistContext {
    fn path(&self, p: &str) -> PathBuf {
        match &self.base_dir {
            Some(d) if Path::new(p).is_relative() => d.join(p),
            _ => PathBuf::from(p),
        }
    }

    fn table(&self, key: &str) -> Result<Vec<(f64, f64)>> {
        if let Some(t) = self.tables.get(key) {
            return Ok(t.clone());
        }
        let path = self.path(key);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        read_table_csv(&text)
    }

    fn model(&self, key: &str) -> Result<Arc<ReducedModel>> {
        if let Some(m) = self.models.get(key) {
            return Ok(m.clone());
        }
        let path = self.path(key);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Arc::new(read_reduced(&text)?))
    }
}

/// Two numeric columns (Hz, Ω); a non-numeric first line is a header.
pub fn read_table_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() >= 2)
            .then(|| Some((cols[0].parse::<f64>().ok()?, cols[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some(p) => out.push(p),
            None if i == 0 => continue,
            None => {
                return Err(Error::Parse {
                    message: format!("bad table row `{line}`"),
                    location: Location { line: i + 1, column: 1 },
                })
            }
        }
    }
    Ok(out)
}

struct Card {
    line: usize,
    tokens: Vec<String>,
}

fn tokenize(line: &str) -> Vec<String> {
    let spaced = line.replace('(', " ( ").replace(')', " ) ").replace(',', " ");
    let mut out: Vec<String> = Vec::new();
    for t in spaced.split_whitespace() {
        // `key = value` → `key=value`
        if t == "=" || t.starts_with('=') || out.last().is_some_and(|l| l.ends_with('=')) {
            let last = out.pop().unwrap_or_default();
            out.push(last + t);
        } else {
            out.push(t.to_string());
        }
    }
    out
}

fn cards(text: &str) -> Vec<Card> {
    let mut out: Vec<Card> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('+') {
            if let Some(last) = out.last_mut() {
                last.tokens.extend(tokenize(rest));
                continue;
            }
        }
        out.push(Card {
            line: i + 1,
            tokens: tokenize(line),
        });
    }
    out
}

struct Subckt {
    ports: Vec<String>,
    body: Vec<Card>,
}

struct Parser<'a> {
    ctx: &'a NetlistContext,
    subckts: BTreeMap<String, Subckt>,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        message: message.into(),
        location: Location { line, column: 1 },
    }
}

fn at_line(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse { .. } | Error::Io { .. } => e,
        other => perr(line, other.to_string()),
    }
}

fn num(line: usize, s: &str) -> Result<f64> {
    parse_quantity(s).map_err(|_| perr(line, format!("bad number `{s}`")))
}

/// Splits tokens into positional values and `key=value` parameters.
fn split_params(line: usize, tokens: &[String]) -> Result<(Vec<String>, BTreeMap<String, String>)> {
    let mut pos = Vec::new();
    let mut params = BTreeMap::new();
    for t in tokens {
        if let Some((k, v)) = t.split_once('=') {
            if k.is_empty() || v.is_empty() {
                return Err(perr(line, format!("malformed parameter `{t}`")));
            }
            if params.insert(k.to_ascii_lowercase(), v.to_string()).is_some() {
                return Err(perr(line, format!("parameter `{k}` given twice")));
            }
        } else {
            pos.push(t.clone());
        }
    }
    Ok((pos, params))
}

fn take_param(line: usize, params: &mut BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = params
        .remove(key)
        .ok_or_else(|| perr(line, format!("missing parameter `{key}=`")))?;
    num(line, &v)
}

fn no_extra(line: usize, params: &BTreeMap<String, String>) -> Result<()> {
    match params.keys().next() {
        Some(k) => Err(perr(line, format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

fn parse_bool(line: usize, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(perr(line, format!("bad flag `{s}`"))),
    }
}

fn group(line: usize, toks: &[String], i: &mut usize) -> Result<Vec<f64>> {
    if toks.get(*i).map(String::as_str) != Some("(") {
        return Err(perr(line, "expected `(`"));
    }
    *i += 1;
    let mut v = Vec::new();
    while let Some(t) = toks.get(*i) {
        *i += 1;
        if t == ")" {
            return Ok(v);
        }
        v.push(num(line, t)?);
    }
    Err(perr(line, "unclosed `(`"))
}

fn parse_source(line: usize, toks: &[String]) -> Result<Source> {
    let mut s = Source::default();
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i].to_ascii_lowercase();
        match t.as_str() {
            "dc" => {
                s.dc = num(line, toks.get(i + 1).ok_or_else(|| perr(line, "DC needs a value"))?)?;
                i += 2;
            }
            "ac" => {
                let mag = num(line, toks.get(i + 1).ok_or_else(|| perr(line, "AC needs a magnitude"))?)?;
                i += 2;
                let mut phase = 0.0;
                if let Some(p) = toks.get(i).and_then(|p| parse_quantity(p).ok()) {
                    phase = p;
                    i += 1;
                }
                s.ac = Complex64::from_polar(mag, phase.to_radians());
            }
            "step" | "sin" | "pwl" => {
                i += 1;
                let v = group(line, toks, &mut i)?;
                s.wave = Some(match (t.as_str(), v.as_slice()) {
                    ("step", [v0, v1]) => TimeWave::Step { v0: *v0, v1: *v1, delay: 0.0 },
                    ("step", [v0, v1, d]) => TimeWave::Step { v0: *v0, v1: *v1, delay: *d },
                    ("sin", [o, a, f]) => TimeWave::Sin {
                        offset: *o,
                        amplitude: *a,
                        frequency: *f,
                        delay: 0.0,
                    },
                    ("sin", [o, a, f, d]) => TimeWave::Sin {
                        offset: *o,
                        amplitude: *a,
                        frequency: *f,
                        delay: *d,
                    },
                    ("pwl", p) if p.len() >= 2 && p.len() % 2 == 0 => {
                        let pts: Vec<(f64, f64)> = p.chunks(2).map(|c| (c[0], c[1])).collect();
                        if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                            return Err(perr(line, "PWL times must increase"));
                        }
                        TimeWave::Pwl(pts)
                    }
                    _ => return Err(perr(line, format!("wrong argument count for {}", t.to_uppercase()))),
                });
                if let Some(w) = &s.wave {
                    if s.dc == 0.0 {
                        s.dc = w.at(0.0);
                    }
                }
            }
            _ if i == 0 => {
                s.dc = num(line, &toks[0])?;
                i += 1;
            }
            _ => return Err(perr(line, format!("unexpected source token `{}`", toks[i]))),
        }
    }
    Ok(s)
}

impl<'a> Parser<'a> {
    fn collect_subckts(&mut self, cards: Vec<Card>) -> Result<Vec<Card>> {
        let mut top = Vec::new();
        let mut it = cards.into_iter();
        while let Some(c) = it.next() {
            let head = c.tokens[0].to_ascii_lowercase();
            if head == ".subckt" {
                if c.tokens.len() < 2 {
                    return Err(perr(c.line, ".SUBCKT needs a name"));
                }
                let name = c.tokens[1].to_ascii_lowercase();
                let ports = c.tokens[2..].to_vec();
                let mut body = Vec::new();
                let mut closed = false;
                for b in it.by_ref() {
                    let h = b.tokens[0].to_ascii_lowercase();
                    if h == ".ends" {
                        closed = true;
                        break;
                    }
                    if h == ".subckt" {
                        return Err(perr(b.line, "nested .SUBCKT definitions are not supported"));
                    }
                    body.push(b);
                }
                if !closed {
                    return Err(perr(c.line, format!("`.SUBCKT {name}` has no .ENDS")));
                }
                if self.subckts.insert(name.clone(), Subckt { ports, body }).is_some() {
                    return Err(perr(c.line, format!("subcircuit `{name}` defined twice")));
                }
            } else if head == ".end" {
                break;
            } else {
                top.push(c);
            }
        }
        Ok(top)
    }

    /// Instantiates `cards` into `net`; `map` renames local nodes, `prefix`
    /// scopes element names.
    fn emit(
        &self,
        net: &mut Netlist,
        cards: &[Card],
        prefix: &str,
        map: &BTreeMap<String, String>,
        depth: usize,
    ) -> Result<()> {
        if depth > 16 {
            return Err(Error::Input("subcircuit nesting deeper than 16 (recursive definition?)".into()));
        }
        let node = |n: &str| -> String {
            if is_ground(n) {
                "0".into()
            } else if let Some(m) = map.get(n) {
                m.clone()
            } else {
                format!("{prefix}{n}")
            }
        };
        for c in cards {
            let line = c.line;
            let t = &c.tokens;
            let name = &t[0];
            if name.starts_with('.') {
                if name.eq_ignore_ascii_case(".title") {
                    net.title = t[1..].join(" ");
                    continue;
                }
                return Err(perr(line, format!("unsupported directive `{name}`")));
            }
            let full = format!("{prefix}{name}");
            let (pos, mut params) = split_params(line, &t[1..])?;
            let need = |k: usize| -> Result<()> {
                if pos.len() < k {
                    Err(perr(line, format!("`{name}` needs at least {k} fields")))
                } else {
                    Ok(())
                }
            };
            let letter = name.chars().next().unwrap_or(' ').to_ascii_uppercase();
            let upper = name.to_ascii_uppercase();
            let kind: ElementKind;
            let nodes: Vec<String>;
            match letter {
                'R' if upper.starts_with("RF") && params.contains_key("table") => {
                    need(2)?;
                    let key = params.remove("table").unwrap_or_default();
                    let clamp = match params.remove("clamp") {
                        Some(v) => parse_bool(line, &v)?,
                        None => false,
                    };
                    no_extra(line, &params)?;
                    let pts = self.ctx.table(&key).map_err(at_line(line))?;
                    kind = ElementKind::FreqResistor {
                        table: FreqTable::new(&pts, clamp).map_err(at_line(line))?,
                    };
                    nodes = pos[..2].to_vec();
                }
                'R' if upper.starts_with("RT") && params.contains_key("tport") => {
                    need(2)?;
                    let tport = params.remove("tport").unwrap_or_default();
                    let r0 = take_param(line, &mut params, "r0")?;
                    let t0 = take_param(line, &mut params, "t0")?;
                    let alpha = take_param(line, &mut params, "alpha")?;
                    no_extra(line, &params)?;
                    kind = ElementKind::Etherm { r0, t0, alpha, tport };
                    nodes = pos[..2].to_vec();
                }
                'R' | 'C' | 'L' => {
                    need(3)?;
                    if pos.len() > 3 {
                        return Err(perr(line, format!("unexpected field `{}`", pos[3])));
                    }
                    let v = num(line, &pos[2])?;
                    let ic = params.remove("ic").map(|s| num(line, &s)).transpose()?;
                    no_extra(line, &params)?;
                    kind = match letter {
                        'R' => ElementKind::Resistor { r: v },
                        'C' => ElementKind::Capacitor { c: v, ic },
                        _ => ElementKind::Inductor { l: v, ic },
                    };
                    nodes = pos[..2].to_vec();
                }
                'V' | 'I' => {
                    need(2)?;
                    no_extra(line, &params)?;
                    let s = parse_source(line, &pos[2..])?;
                    kind = if letter == 'V' { ElementKind::VSource(s) } else { ElementKind::ISource(s) };
                    nodes = pos[..2].to_vec();
                }
                'G' | 'E' => {
                    need(5)?;
                    no_extra(line, &params)?;
                    let v = num(line, &pos[4])?;
                    kind = if letter == 'G' { ElementKind::Vccs { gm: v } } else { ElementKind::Vcvs { gain: v } };
                    nodes = pos[..4].to_vec();
                }
                'F' => {
                    need(4)?;
                    no_extra(line, &params)?;
                    kind = ElementKind::Cccs {
                        control: format!("{prefix}{}", pos[2]),
                        gain: num(line, &pos[3])?,
                    };
                    nodes = pos[..2].to_vec();
                }
                'K' => {
                    need(3)?;
                    no_extra(line, &params)?;
                    kind = ElementKind::Mutual {
                        l1: format!("{prefix}{}", pos[0]),
                        l2: format!("{prefix}{}", pos[1]),
                        k: num(line, &pos[2])?,
                    };
                    nodes = Vec::new();
                }
                'T' => {
                    need(4)?;
                    let p = LineParams {
                        rpul: take_param(line, &mut params, "rpul")?,
                        lpul: take_param(line, &mut params, "lpul")?,
                        gpul: take_param(line, &mut params, "gpul")?,
                        cpul: take_param(line, &mut params, "cpul")?,
                        length: take_param(line, &mut params, "len")?,
                    };
                    no_extra(line, &params)?;
                    kind = ElementKind::TLine(p);
                    nodes = pos[..4].to_vec();
                }
                'X' => {
                    if let Some(key) = params.remove("model") {
                        no_extra(line, &params)?;
                        let model = self.ctx.model(&key).map_err(at_line(line))?;
                        kind = ElementKind::Block { model, source: key };
                        nodes = pos.clone();
                    } else {
                        need(1)?;
                        no_extra(line, &params)?;
                        let sub_name = pos[pos.len() - 1].to_ascii_lowercase();
                        let sub = self
                            .subckts
                            .get(&sub_name)
                            .ok_or_else(|| perr(line, format!("unknown subcircuit `{sub_name}`")))?;
                        let actual = &pos[..pos.len() - 1];
                        if actual.len() != sub.ports.len() {
                            return Err(perr(
                                line,
                                format!("`{sub_name}` has {} ports, {} given", sub.ports.len(), actual.len()),
                            ));
                        }
                        let inner: BTreeMap<String, String> = sub
                            .ports
                            .iter()
                            .zip(actual)
                            .map(|(p, a)| (p.clone(), node(a)))
                            .collect();
                        self.emit(net, &sub.body, &format!("{full}."), &inner, depth + 1)?;
                        continue;
                    }
                }
                _ => return Err(perr(line, format!("unknown element type `{name}`"))),
            }
            let mapped: Vec<String> = nodes.iter().map(|n| node(n)).collect();
            let refs: Vec<&str> = mapped.iter().map(String::as_str).collect();
            net.add(&full, &refs, kind).map_err(at_line(line))?;
        }
        Ok(())
    }
}

/// Parses netlist text. Element letters are case-insensitive; `RF…` with
/// `table=` and `RT…` with `tport=` are the special resistors.
pub fn parse_netlist(text: &str, ctx: &NetlistContext) -> Result<Netlist> {
    let mut p = Parser {
        ctx,
        subckts: BTreeMap::new(),
    };
    let top = p.collect_subckts(cards(text))?;
    let mut net = Netlist::new();
    p.emit(&mut net, &top, "", &BTreeMap::new(), 0)?;
    net.validate()?;
    Ok(net)
}

pub fn load_netlist(path: &Path, ctx: &NetlistContext) -> Result<Netlist> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ctx = ctx.clone();
    if ctx.base_dir.is_none() {
        ctx.base_dir = path.parent().map(Path::to_path_buf);
    }
    parse_netlist(&text, &ctx)
}
