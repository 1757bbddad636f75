//! Project configuration: strict TOML schema with engineering-notation values.
//!
//! Values may be written bare with a unit suffix (`diameter = 10um`); they
//! are quoted before TOML parsing and converted to SI on deserialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::Spanned;

use crate::error::{Error, Location, Result};
use crate::model::{
    assemble_stack, BasicModule, CrossSection, DeviceSite, Footprint, Interlayer, Layer, Material, MaterialDb,
    ModuleLibrary, PlacedShape, Placement, Primitive, StackModel, Sublayer, ViaParams,
};
use crate::thermal::{BoundaryCondition, Boundaries};
use crate::units::{parse_quantity, split_number};

/// SI value read from a number or an engineering-notation string.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quantity(pub f64);

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Quantity;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a quantity such as `10um`")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Quantity, E> {
                Ok(Quantity(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Quantity, E> {
                Ok(Quantity(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Quantity, E> {
                if v.is_finite() {
                    Ok(Quantity(v))
                } else {
                    Err(E::custom(format!("value {v} is not finite")))
                }
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Quantity, E> {
                parse_quantity(v).map(Quantity).map_err(|_| E::custom(format!("bad unit or number `{v}`")))
            }
        }
        d.deserialize_any(V)
    }
}

type Name = Spanned<String>;

fn one() -> Quantity {
    Quantity(1.0)
}

fn plus() -> i8 {
    1
}

fn two() -> usize {
    2
}

fn eight() -> usize {
    8
}

fn vacuum() -> Name {
    Spanned::new(0..0, "vacuum".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    /// S/m
    #[serde(default)]
    pub conductivity: Quantity,
    #[serde(default = "one")]
    pub relative_permittivity: Quantity,
    /// W/(m·K)
    pub thermal_conductivity: Quantity,
    /// J/(m³·K)
    pub heat_capacity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle { diameter: Quantity },
    Square { side: Quantity },
    Rectangle { width: Quantity, height: Quantity },
    /// Vertices relative to the shape center.
    Polygon { vertices: Vec<[Quantity; 2]> },
    /// Circular sector with its apex at the shape center; angles in degrees.
    Sector { diameter: Quantity, start: f64, sweep: f64 },
}

const SECTOR_SEGMENTS_PER_TURN: f64 = 96.0;

impl ShapeSpec {
    fn primitive(&self) -> Primitive {
        match self {
            ShapeSpec::Circle { diameter } => Primitive::Circle { radius: 0.5 * diameter.0 },
            ShapeSpec::Square { side } => Primitive::Rectangle { width: side.0, height: side.0 },
            ShapeSpec::Rectangle { width, height } => Primitive::Rectangle { width: width.0, height: height.0 },
            ShapeSpec::Polygon { vertices } => Primitive::Polygon {
                vertices: vertices.iter().map(|v| [v[0].0, v[1].0]).collect(),
            },
            ShapeSpec::Sector { diameter, start, sweep } => {
                let n = (SECTOR_SEGMENTS_PER_TURN * sweep.abs() / 360.0).ceil().max(1.0) as usize;
                // polygon radius with the area of the exact sector
                let step = (sweep / n as f64).to_radians().abs();
                let r = 0.5 * diameter.0 * (step / step.sin()).sqrt();
                let mut vertices = vec![[0.0, 0.0]];
                for k in 0..=n {
                    let a = (start + sweep * k as f64 / n as f64).to_radians();
                    vertices.push([r * a.cos(), r * a.sin()]);
                }
                Primitive::Polygon { vertices }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub shape: ShapeSpec,
    #[serde(default)]
    pub x: Quantity,
    #[serde(default)]
    pub y: Quantity,
    #[serde(default)]
    pub group: usize,
    /// Reference direction of the group current, ±1.
    #[serde(default = "plus")]
    pub sign: i8,
}

/// One `shape` or a list of `parts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionSpec {
    pub material: Name,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartSpec>,
}

impl CrossSectionSpec {
    pub fn build(&self) -> Result<CrossSection> {
        let cs = match (&self.shape, self.parts.is_empty()) {
            (Some(s), true) => match s.primitive() {
                Primitive::Circle { radius } => CrossSection::Circle { radius },
                Primitive::Rectangle { width, height } => CrossSection::Rectangle { width, height },
                Primitive::Polygon { vertices } => CrossSection::Polygon { vertices },
            },
            (None, false) => CrossSection::Composite(
                self.parts
                    .iter()
                    .map(|p| PlacedShape::new(p.shape.primitive(), [p.x.0, p.y.0], p.group).with_sign(p.sign))
                    .collect(),
            ),
            _ => return Err(Error::config("a cross-section needs exactly one of `shape` or `parts`")),
        };
        cs.validate()?;
        Ok(cs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SublayerSpec {
    pub thickness: Quantity,
    pub material: Name,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaSpec {
    /// Detail level 1, 2 or 3.
    pub level: u8,
    pub diameter: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_diameter: Option<Quantity>,
    pub length: Quantity,
    pub material: Name,
    #[serde(default = "two")]
    pub taper_segments: usize,
    #[serde(default)]
    pub connection: Vec<SublayerSpec>,
    #[serde(default)]
    pub metallization: Vec<SublayerSpec>,
}

impl ViaSpec {
    pub fn params(&self) -> ViaParams {
        let sub = |v: &[SublayerSpec]| -> Vec<Sublayer> {
            v.iter().map(|s| Sublayer::new(s.thickness.0, s.material.get_ref().clone())).collect()
        };
        ViaParams {
            diameter: self.diameter.0,
            bottom_diameter: self.bottom_diameter.map(|q| q.0),
            length: self.length.0,
            material: self.material.get_ref().clone(),
            taper_segments: self.taper_segments,
            connection: sub(&self.connection),
            metallization: sub(&self.metallization),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FootprintSpec {
    Circle { diameter: Quantity },
    Square { side: Quantity },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub footprint: FootprintSpec,
    pub material: Name,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub thickness: Quantity,
    pub material: Name,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub module: Name,
    pub layer: usize,
    pub x: Quantity,
    pub y: Quantity,
    /// Degrees, a multiple of 90.
    #[serde(default)]
    pub rotation: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub layer: usize,
    pub x: Quantity,
    pub y: Quantity,
    pub width: Quantity,
    pub height: Quantity,
    /// W
    pub power: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSpec {
    pub extent: [Quantity; 2],
    pub layers: Vec<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interlayer: Option<LayerSpec>,
    #[serde(default)]
    pub placements: Vec<PlacementSpec>,
    #[serde(default)]
    pub sites: Vec<SiteSpec>,
}

/// Log-spaced sweep, optionally preceded by DC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
    #[serde(default)]
    pub include_dc: bool,
}

impl FrequencySpec {
    pub fn grid(&self) -> Vec<f64> {
        crate::em::log_grid(self.start.0, self.stop.0, self.points, self.include_dc)
    }

    fn check(&self) -> Result<()> {
        if !(self.start.0 > 0.0 && self.stop.0 >= self.start.0 && self.points >= 1) {
            return Err(Error::config("frequency sweep needs 0 < start <= stop and points >= 1"));
        }
        Ok(())
    }
}

/// Face temperatures are plain kelvin numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaceSpec {
    Fixed { temperature: f64 },
    Adiabatic,
    /// `h` in W/(m²·K).
    Convective { h: f64, ambient: f64 },
}

impl From<FaceSpec> for BoundaryCondition {
    fn from(f: FaceSpec) -> Self {
        match f {
            FaceSpec::Fixed { temperature } => BoundaryCondition::Fixed { temperature },
            FaceSpec::Adiabatic => BoundaryCondition::Adiabatic,
            FaceSpec::Convective { h, ambient } => BoundaryCondition::Convective { h, ambient },
        }
    }
}

fn adiabatic() -> FaceSpec {
    FaceSpec::Adiabatic
}

fn heatsink() -> FaceSpec {
    FaceSpec::Fixed { temperature: 300.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "adiabatic")]
    pub x_min: FaceSpec,
    #[serde(default = "adiabatic")]
    pub x_max: FaceSpec,
    #[serde(default = "adiabatic")]
    pub y_min: FaceSpec,
    #[serde(default = "adiabatic")]
    pub y_max: FaceSpec,
    #[serde(default = "heatsink")]
    pub bottom: FaceSpec,
    #[serde(default = "adiabatic")]
    pub top: FaceSpec,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            x_min: adiabatic(),
            x_max: adiabatic(),
            y_min: adiabatic(),
            y_max: adiabatic(),
            bottom: heatsink(),
            top: adiabatic(),
        }
    }
}

impl BoundarySpec {
    pub fn faces(&self) -> Boundaries {
        [self.x_min, self.x_max, self.y_min, self.y_max, self.bottom, self.top].map(Into::into)
    }
}

/// One impedance curve: a cross-section (per unit length) or a whole via.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZVariant {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_section: Option<Name>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<Name>,
    /// Group currents, A; group 0 alone carries 1 A if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractZStage {
    pub variants: Vec<ZVariant>,
    pub frequencies: FrequencySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<Quantity>,
    #[serde(default)]
    pub preserve_area: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_radius: Option<Quantity>,
    /// Also write the current density of every cross-section variant at these frequencies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density_at: Vec<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractCStage {
    pub cross_section: Name,
    /// Center distances, m.
    pub distances: Vec<Quantity>,
    #[serde(default = "vacuum")]
    pub background: Name,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingExport {
    /// One of the sweep distances.
    pub distance: Quantity,
    pub length: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingStage {
    pub cross_section: Name,
    pub substrate: Name,
    pub distances: Vec<Quantity>,
    pub frequency: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<CouplingExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotateSpec {
    pub layer: usize,
    pub quarter_turns: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalViaSpec {
    pub module: Name,
    pub positions: Vec<[Quantity; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalVariant {
    pub name: String,
    #[serde(default)]
    pub rotate: Vec<RotateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_vias: Option<ThermalViaSpec>,
}

fn base_variant() -> Vec<ThermalVariant> {
    vec![ThermalVariant {
        name: "base".into(),
        rotate: Vec::new(),
        thermal_vias: None,
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalStage {
    pub stack: Name,
    pub pitch: [Quantity; 3],
    #[serde(default)]
    pub boundaries: BoundarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default = "base_variant")]
    pub variants: Vec<ThermalVariant>,
    /// Also write the full temperature field as CSV.
    #[serde(default)]
    pub write_field: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    pub t_end: Quantity,
    pub steps: usize,
    /// Step amplitude per port, W.
    pub amplitudes: Vec<Quantity>,
    #[serde(default)]
    pub frequencies: Vec<Quantity>,
    #[serde(default = "eight")]
    pub frequency_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceStage {
    pub stack: Name,
    pub pitch: [Quantity; 3],
    #[serde(default)]
    pub boundaries: BoundarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcStage {
    /// Netlist path, relative to the configuration file.
    pub netlist: String,
    pub frequencies: FrequencySpec,
    /// Probed nodes; all nodes if empty.
    #[serde(default)]
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub rpul: Quantity,
    pub lpul: Quantity,
    #[serde(default)]
    pub gpul: Quantity,
    pub cpul: Quantity,
    pub length: Quantity,
}

impl From<LineSpec> for crate::circuit::LineParams {
    fn from(l: LineSpec) -> Self {
        Self {
            rpul: l.rpul.0,
            lpul: l.lpul.0,
            gpul: l.gpul.0,
            cpul: l.cpul.0,
            length: l.length.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfStage {
    pub source_resistance: Quantity,
    pub load_resistance: Quantity,
    pub line: LineSpec,
    /// Line after the via; same as `line` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line2: Option<LineSpec>,
    pub frequencies: FrequencySpec,
    /// Fixed via resistance, Ω.
    pub via_resistance: Quantity,
    /// `extract_z` stage whose first variant shapes the table: `R(f)/R_DC` times `via_resistance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_from: Option<Name>,
    /// CSV of `frequency_hz,r_ohm`, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default)]
    pub clamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EthermStage {
    pub netlist: String,
    /// A `reduce` stage; its reduced model, or its full network with `full_network`.
    pub thermal_from: Name,
    #[serde(default)]
    pub full_network: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    ExtractZ(ExtractZStage),
    ExtractC(ExtractCStage),
    Coupling(CouplingStage),
    Thermal(ThermalStage),
    Reduce(ReduceStage),
    Ac(AcStage),
    Tf(TfStage),
    Etherm(EthermStage),
}

impl StageSpec {
    /// CLI verb of this stage kind.
    pub fn verb(&self) -> &'static str {
        match self {
            StageSpec::ExtractZ(_) => "extract-z",
            StageSpec::ExtractC(_) => "extract-c",
            StageSpec::Coupling(_) => "coupling-sweep",
            StageSpec::Thermal(_) => "thermal",
            StageSpec::Reduce(_) => "reduce",
            StageSpec::Ac(_) => "ac",
            StageSpec::Tf(_) => "tf",
            StageSpec::Etherm(_) => "etherm",
        }
    }

    /// Stages whose results this one consumes.
    pub fn dependencies(&self) -> Vec<&Name> {
        match self {
            StageSpec::Tf(t) => t.table_from.iter().collect(),
            StageSpec::Etherm(e) => vec![&e.thermal_from],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub stages: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    /// Added to, or replacing, the built-in materials.
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialSpec>,
    #[serde(default)]
    pub cross_sections: BTreeMap<String, CrossSectionSpec>,
    #[serde(default)]
    pub vias: BTreeMap<String, ViaSpec>,
    #[serde(default)]
    pub modules: BTreeMap<String, ModuleSpec>,
    #[serde(default)]
    pub stacks: BTreeMap<String, StackSpec>,
    #[serde(default)]
    pub stages: BTreeMap<String, StageSpec>,
    #[serde(default)]
    pub scenarios: BTreeMap<String, ScenarioSpec>,
}

/// Maps byte offsets of the quoted text back to lines and columns of the original.
struct SourceMap {
    line_starts: Vec<usize>,
    /// Offsets in the quoted text of every inserted quote.
    inserted: Vec<usize>,
}

impl SourceMap {
    fn locate(&self, offset: usize) -> Location {
        let shift = self.inserted.partition_point(|&p| p < offset);
        let o = offset - shift;
        let line = self.line_starts.partition_point(|&s| s <= o);
        Location {
            line,
            column: o - self.line_starts[line - 1] + 1,
        }
    }
}

fn is_quantity_token(t: &str) -> bool {
    match split_number(t) {
        Some((_, suffix)) if !suffix.is_empty() => {
            suffix.chars().all(|c| c.is_alphabetic() || c == '/') && parse_quantity(t).is_ok()
        }
        _ => false,
    }
}

/// Quotes bare engineering-notation values outside strings and comments.
fn quote_quantities(text: &str) -> (String, SourceMap) {
    let mut out = String::with_capacity(text.len() + 64);
    let mut inserted = Vec::new();
    let mut line_starts = vec![0];
    for (i, c) in text.char_indices() {
        if c == '\n' {
            line_starts.push(i + 1);
        }
    }
    let b = text.as_bytes();
    let mut i = 0;
    let mut last_sig = '\n';
    let is_tok = |c: char| c.is_alphanumeric() || matches!(c, '_' | '.' | '+' | '-' | '/' | 'µ' | 'μ' | ':');
    while i < text.len() {
        let c = text[i..].chars().next().expect("in bounds");
        if c == '#' {
            let end = text[i..].find('\n').map_or(text.len(), |k| i + k);
            out.push_str(&text[i..end]);
            i = end;
            continue;
        }
        if c == '"' || c == '\'' {
            let triple = b.len() >= i + 3 && b[i + 1] == c as u8 && b[i + 2] == c as u8;
            let end = if triple {
                let close = if c == '"' { "\"\"\"" } else { "'''" };
                text[i + 3..].find(close).map_or(text.len(), |k| i + 3 + k + 3)
            } else {
                let mut j = i + 1;
                while j < b.len() && b[j] != c as u8 && b[j] != b'\n' {
                    j += if c == '"' && b[j] == b'\\' { 2 } else { 1 };
                }
                (j + 1).min(text.len())
            };
            out.push_str(&text[i..end]);
            last_sig = c;
            i = end;
            continue;
        }
        if is_tok(c) {
            let end = text[i..].find(|ch: char| !is_tok(ch)).map_or(text.len(), |k| i + k);
            let tok = &text[i..end];
            if matches!(last_sig, '=' | '[' | ',') && is_quantity_token(tok) {
                inserted.push(out.len());
                out.push('"');
                out.push_str(tok);
                inserted.push(out.len());
                out.push('"');
            } else {
                out.push_str(tok);
            }
            last_sig = 'a';
            i = end;
            continue;
        }
        if !c.is_whitespace() {
            last_sig = c;
        }
        out.push(c);
        i += c.len_utf8();
    }
    (out, SourceMap { line_starts, inserted })
}

pub fn parse_config(path: &Path) -> Result<ProjectConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<ProjectConfig> {
    let (quoted, map) = quote_quantities(text);
    let cfg: ProjectConfig = toml::from_str(&quoted).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(s) => Error::config_at(msg, map.locate(s.start)),
            None => Error::config(msg),
        }
    })?;
    Checker { cfg: &cfg, map: &map }.run()?;
    Ok(cfg)
}

/// Canonical TOML with every value in SI.
pub fn to_toml(cfg: &ProjectConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Export(format!("configuration: {e}")))
}

struct Checker<'a> {
    cfg: &'a ProjectConfig,
    map: &'a SourceMap,
}

impl Checker<'_> {
    fn at(&self, name: &Name, msg: String) -> Error {
        let s = name.span();
        if s.is_empty() {
            Error::config(msg)
        } else {
            Error::config_at(msg, self.map.locate(s.start))
        }
    }

    fn known<T>(&self, name: &Name, table: &BTreeMap<String, T>, what: &str) -> Result<()> {
        if table.contains_key(name.get_ref()) {
            Ok(())
        } else {
            Err(self.at(name, format!("undefined {what} `{}`", name.get_ref())))
        }
    }

    fn material(&self, db: &MaterialDb, name: &Name) -> Result<()> {
        if db.contains(name.get_ref()) {
            Ok(())
        } else {
            Err(self.at(name, format!("undefined material `{}`", name.get_ref())))
        }
    }

    fn run(&self) -> Result<()> {
        let cfg = self.cfg;
        let db = materials(cfg)?;
        for (n, cs) in &cfg.cross_sections {
            self.material(&db, &cs.material)?;
            cs.build().map_err(|e| Error::config(format!("cross-section `{n}`: {e}")))?;
        }
        for (n, v) in &cfg.vias {
            self.material(&db, &v.material)?;
            for s in v.connection.iter().chain(&v.metallization) {
                self.material(&db, &s.material)?;
            }
            crate::model::via_detail_model(v.level, &v.params())
                .map_err(|e| Error::config(format!("via `{n}`: {e}")))?;
        }
        for m in cfg.modules.values() {
            self.material(&db, &m.material)?;
        }
        for (n, s) in &cfg.stacks {
            for l in s.layers.iter().chain(&s.interlayer) {
                self.material(&db, &l.material)?;
            }
            for p in &s.placements {
                self.known(&p.module, &cfg.modules, "module")?;
            }
            build_stack(cfg, n)?;
        }
        for (n, st) in &cfg.stages {
            self.stage(&db, n, st)?;
        }
        for sc in cfg.scenarios.values() {
            if sc.stages.is_empty() {
                return Err(Error::config("a scenario needs at least one stage"));
            }
            for s in &sc.stages {
                self.known(s, &cfg.stages, "stage")?;
            }
        }
        Ok(())
    }

    fn stage(&self, db: &MaterialDb, name: &str, st: &StageSpec) -> Result<()> {
        let cfg = self.cfg;
        let ctx = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config(format!("stage `{name}`: {other}")),
        };
        let stage_kind = |n: &Name, want: &str| -> Result<()> {
            self.known(n, &cfg.stages, "stage")?;
            if cfg.stages[n.get_ref()].verb() != want {
                return Err(self.at(n, format!("stage `{}` is not a {want} stage", n.get_ref())));
            }
            Ok(())
        };
        match st {
            StageSpec::ExtractZ(z) => {
                z.frequencies.check().map_err(ctx)?;
                if z.variants.is_empty() {
                    return Err(ctx(Error::config("needs at least one variant")));
                }
                let mut names = BTreeSet::new();
                for v in &z.variants {
                    if !names.insert(&v.name) {
                        return Err(ctx(Error::config(format!("duplicate variant `{}`", v.name))));
                    }
                    match (&v.cross_section, &v.via) {
                        (Some(c), None) => self.known(c, &cfg.cross_sections, "cross-section")?,
                        (None, Some(c)) => self.known(c, &cfg.vias, "via")?,
                        _ => {
                            return Err(ctx(Error::config(format!(
                                "variant `{}` needs exactly one of `cross_section` or `via`",
                                v.name
                            ))))
                        }
                    }
                }
            }
            StageSpec::ExtractC(c) => {
                self.known(&c.cross_section, &cfg.cross_sections, "cross-section")?;
                self.material(db, &c.background)?;
                if c.distances.is_empty() {
                    return Err(ctx(Error::config("needs at least one distance")));
                }
            }
            StageSpec::Coupling(c) => {
                self.known(&c.cross_section, &cfg.cross_sections, "cross-section")?;
                self.material(db, &c.substrate)?;
                if let Some(x) = &c.export {
                    if !c.distances.iter().any(|d| (d.0 - x.distance.0).abs() <= 1e-12 * d.0.abs()) {
                        return Err(ctx(Error::config("export distance is not one of the sweep distances")));
                    }
                }
            }
            StageSpec::Thermal(t) => {
                self.known(&t.stack, &cfg.stacks, "stack")?;
                for v in &t.variants {
                    if let Some(tv) = &v.thermal_vias {
                        self.known(&tv.module, &cfg.modules, "module")?;
                    }
                }
            }
            StageSpec::Reduce(r) => {
                self.known(&r.stack, &cfg.stacks, "stack")?;
                if r.order == 0 {
                    return Err(ctx(Error::config("order must be >= 1")));
                }
            }
            StageSpec::Ac(a) => a.frequencies.check().map_err(ctx)?,
            StageSpec::Tf(t) => {
                t.frequencies.check().map_err(ctx)?;
                if let Some(n) = &t.table_from {
                    stage_kind(n, "extract-z")?;
                    if t.table.is_some() {
                        return Err(ctx(Error::config("give at most one of `table_from` and `table`")));
                    }
                }
            }
            StageSpec::Etherm(e) => stage_kind(&e.thermal_from, "reduce")?,
        }
        Ok(())
    }
}

/// Built-in materials overridden by the configured ones.
pub fn materials(cfg: &ProjectConfig) -> Result<MaterialDb> {
    let mut db = MaterialDb::builtin();
    for (n, m) in &cfg.materials {
        let m = Material::new(
            n.clone(),
            m.conductivity.0,
            m.relative_permittivity.0,
            m.thermal_conductivity.0,
            m.heat_capacity.0,
        )
        .map_err(|e| Error::config(e.to_string()))?;
        db.insert(m);
    }
    Ok(db)
}

pub fn build_stack(cfg: &ProjectConfig, name: &str) -> Result<StackModel> {
    let s = cfg
        .stacks
        .get(name)
        .ok_or_else(|| Error::config(format!("undefined stack `{name}`")))?;
    let layers = s
        .layers
        .iter()
        .map(|l| Layer::new(l.thickness.0, l.material.get_ref().clone()))
        .collect();
    let interlayer = s.interlayer.as_ref().map(|l| Interlayer {
        thickness: l.thickness.0,
        material: l.material.get_ref().clone(),
    });
    let placements = s
        .placements
        .iter()
        .map(|p| Placement {
            module_id: p.module.get_ref().clone(),
            layer: p.layer,
            x: p.x.0,
            y: p.y.0,
            rotation: p.rotation,
        })
        .collect();
    let sites = s
        .sites
        .iter()
        .map(|d| DeviceSite {
            layer: d.layer,
            x: d.x.0,
            y: d.y.0,
            width: d.width.0,
            height: d.height.0,
            power: d.power.0,
        })
        .collect();
    let library: ModuleLibrary = cfg
        .modules
        .iter()
        .map(|(id, m)| {
            let footprint = match m.footprint {
                FootprintSpec::Circle { diameter } => Footprint::Circle { diameter: diameter.0 },
                FootprintSpec::Square { side } => Footprint::Square { side: side.0 },
            };
            let module = BasicModule {
                id: id.clone(),
                footprint,
                material: m.material.get_ref().clone(),
            };
            (id.clone(), module)
        })
        .collect();
    assemble_stack([s.extent[0].0, s.extent[1].0], layers, interlayer, placements, sites, library)
        .map_err(|e| Error::config(format!("stack `{name}`: {e}")))
}
