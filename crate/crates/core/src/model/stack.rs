//! Die stacks assembled from reusable basic modules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Footprint {
    Circle { diameter: f64 },
    Square { side: f64 },
}

impl Footprint {
    pub fn half_width(&self) -> f64 {
        match self {
            Footprint::Circle { diameter } => 0.5 * diameter,
            Footprint::Square { side } => 0.5 * side,
        }
    }

    /// Is the point `(dx, dy)` relative to the module center inside?
    pub fn contains(&self, dx: f64, dy: f64) -> bool {
        match self {
            Footprint::Circle { diameter } => {
                let r = 0.5 * diameter;
                dx * dx + dy * dy <= r * r
            }
            Footprint::Square { side } => dx.abs() <= 0.5 * side && dy.abs() <= 0.5 * side,
        }
    }
}

/// A vertical column of one material through a die (e.g. a via).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicModule {
    pub id: String,
    pub footprint: Footprint,
    pub material: String,
}

pub type ModuleLibrary = BTreeMap<String, BasicModule>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness: f64,
    pub material: String,
    /// Accumulated quarter turns applied to everything placed on this layer.
    #[serde(default)]
    pub quarter_turns: u8,
}

impl Layer {
    pub fn new(thickness: f64, material: impl Into<String>) -> Self {
        Self {
            thickness,
            material: material.into(),
            quarter_turns: 0,
        }
    }
}

/// Bonding layer inserted between consecutive dies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interlayer {
    pub thickness: f64,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub module_id: String,
    pub layer: usize,
    pub x: f64,
    pub y: f64,
    /// Degrees, one of 0, 90, 180, 270.
    pub rotation: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSite {
    pub layer: usize,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    /// W
    pub power: f64,
}

impl DeviceSite {
    /// `[xmin, xmax, ymin, ymax]`
    pub fn rect(&self) -> [f64; 4] {
        [
            self.x - 0.5 * self.width,
            self.x + 0.5 * self.width,
            self.y - 0.5 * self.height,
            self.y + 0.5 * self.height,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Device sites on every layer overlap at this point.
    VerticallyAlignedPower { x: f64, y: f64 },
}

/// Layers bottom to top. Coordinates of placements and sites are stored in the
/// unrotated frame of their layer; accessors apply the layer rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    /// Lateral extent (x, y), the stack spans `[0, ex] x [0, ey]`.
    pub extent: [f64; 2],
    pub layers: Vec<Layer>,
    pub interlayer: Option<Interlayer>,
    pub library: ModuleLibrary,
    placements: Vec<Placement>,
    sites: Vec<DeviceSite>,
}

fn rotate_point(extent: [f64; 2], turns: u8, x: f64, y: f64) -> (f64, f64) {
    let (a, b) = (extent[0], extent[1]);
    match turns % 4 {
        0 => (x, y),
        1 => (a - y, x),
        2 => (a - x, b - y),
        _ => (y, b - x),
    }
}

fn unrotate_point(extent: [f64; 2], turns: u8, x: f64, y: f64) -> (f64, f64) {
    rotate_point(extent, (4 - turns % 4) % 4, x, y)
}

pub fn assemble_stack(
    extent: [f64; 2],
    layers: Vec<Layer>,
    interlayer: Option<Interlayer>,
    placements: Vec<Placement>,
    sites: Vec<DeviceSite>,
    library: ModuleLibrary,
) -> Result<StackModel> {
    if layers.is_empty() {
        return Err(Error::Geometry("a stack needs at least one layer".into()));
    }
    if !(extent[0] > 0.0 && extent[1] > 0.0) {
        return Err(Error::Geometry("stack extent must be positive".into()));
    }
    for (i, l) in layers.iter().enumerate() {
        if !(l.thickness > 0.0) {
            return Err(Error::Geometry(format!("layer {i} thickness must be > 0")));
        }
    }
    if let Some(il) = &interlayer {
        if !(il.thickness > 0.0) {
            return Err(Error::Geometry("interlayer thickness must be > 0".into()));
        }
    }
    let model = StackModel {
        extent,
        layers,
        interlayer,
        library,
        placements: Vec::new(),
        sites: Vec::new(),
    };
    let mut model = model;
    for p in placements {
        model.check_placement(&p)?;
        model.placements.push(p);
    }
    for s in sites {
        model.check_site(&s)?;
        model.sites.push(s);
    }
    Ok(model)
}

impl StackModel {
    fn inside(&self, x: f64, y: f64, hw: f64, hh: f64) -> bool {
        let tol = 1e-12 * self.extent[0].max(self.extent[1]);
        x - hw >= -tol && y - hh >= -tol && x + hw <= self.extent[0] + tol && y + hh <= self.extent[1] + tol
    }

    fn check_placement(&self, p: &Placement) -> Result<()> {
        let module = self.library.get(&p.module_id).ok_or_else(|| {
            Error::Reference(format!("module `{}` is not in the library", p.module_id))
        })?;
        if p.layer >= self.layers.len() {
            return Err(Error::Geometry(format!(
                "placement of `{}` on layer {} but the stack has {} layers",
                p.module_id,
                p.layer,
                self.layers.len()
            )));
        }
        if !p.rotation.is_multiple_of(90) || p.rotation >= 360 {
            return Err(Error::Geometry(format!(
                "module rotation must be a quarter turn (got {})",
                p.rotation
            )));
        }
        let hw = module.footprint.half_width();
        if !self.inside(p.x, p.y, hw, hw) {
            return Err(Error::Geometry(format!(
                "module `{}` at ({:e}, {:e}) lies outside the lateral extent",
                p.module_id, p.x, p.y
            )));
        }
        Ok(())
    }

    fn check_site(&self, s: &DeviceSite) -> Result<()> {
        if s.layer >= self.layers.len() {
            return Err(Error::Geometry(format!("device site on missing layer {}", s.layer)));
        }
        if !(s.width > 0.0 && s.height > 0.0) || !(s.power >= 0.0) {
            return Err(Error::Geometry(
                "device sites need a positive footprint and non-negative power".into(),
            ));
        }
        if !self.inside(s.x, s.y, 0.5 * s.width, 0.5 * s.height) {
            return Err(Error::Geometry(format!(
                "device site at ({:e}, {:e}) lies outside the lateral extent",
                s.x, s.y
            )));
        }
        Ok(())
    }

    /// Placements in stack coordinates, input order.
    pub fn placements(&self) -> Vec<Placement> {
        self.placements
            .iter()
            .map(|p| {
                let turns = self.layers[p.layer].quarter_turns;
                let (x, y) = rotate_point(self.extent, turns, p.x, p.y);
                Placement {
                    module_id: p.module_id.clone(),
                    layer: p.layer,
                    x,
                    y,
                    rotation: (p.rotation + 90 * turns as u16) % 360,
                }
            })
            .collect()
    }

    /// Device sites in stack coordinates, input order.
    pub fn sites(&self) -> Vec<DeviceSite> {
        self.sites
            .iter()
            .map(|s| {
                let turns = self.layers[s.layer].quarter_turns;
                let (x, y) = rotate_point(self.extent, turns, s.x, s.y);
                let (width, height) = if turns % 2 == 1 {
                    (s.height, s.width)
                } else {
                    (s.width, s.height)
                };
                DeviceSite {
                    x,
                    y,
                    width,
                    height,
                    ..s.clone()
                }
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.sites.iter().map(|s| s.power).sum()
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let sites = self.sites();
        let mut out = Vec::new();
        if self.layers.len() < 2 {
            return out;
        }
        for s0 in sites.iter().filter(|s| s.layer == 0) {
            let mut rect = s0.rect();
            let mut ok = true;
            for layer in 1..self.layers.len() {
                let hit = sites.iter().filter(|s| s.layer == layer).find_map(|s| {
                    let r = s.rect();
                    let i = [rect[0].max(r[0]), rect[1].min(r[1]), rect[2].max(r[2]), rect[3].min(r[3])];
                    (i[0] < i[1] && i[2] < i[3]).then_some(i)
                });
                match hit {
                    Some(i) => rect = i,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                out.push(Diagnostic::VerticallyAlignedPower {
                    x: 0.5 * (rect[0] + rect[1]),
                    y: 0.5 * (rect[2] + rect[3]),
                });
            }
        }
        out
    }

    pub fn has_vertically_aligned_power(&self) -> bool {
        !self.diagnostics().is_empty()
    }

    /// z-extent `[bottom, top]` of layer `i` including the interlayer below it.
    pub fn layer_z(&self, i: usize) -> [f64; 2] {
        let il = self.interlayer.as_ref().map_or(0.0, |l| l.thickness);
        let mut z = 0.0;
        for k in 0..i {
            z += self.layers[k].thickness + il;
        }
        [z, z + self.layers[i].thickness]
    }

    pub fn height(&self) -> f64 {
        let n = self.layers.len();
        self.layer_z(n - 1)[1]
    }

    fn footprints_collide(&self, layer: usize, x: f64, y: f64, module: &BasicModule) -> Option<String> {
        for p in self.placements().iter().filter(|p| p.layer == layer) {
            let other = &self.library[&p.module_id];
            let reach = module.footprint.half_width() + other.footprint.half_width();
            let (dx, dy) = ((x - p.x).abs(), (y - p.y).abs());
            let hit = match (&module.footprint, &other.footprint) {
                (Footprint::Circle { .. }, Footprint::Circle { .. }) => dx * dx + dy * dy < reach * reach,
                _ => dx < reach && dy < reach,
            };
            if hit {
                return Some(p.module_id.clone());
            }
        }
        None
    }
}

/// Rotates everything on `layer` about the layer center by `quarter_turns * 90°`.
pub fn rotate_layer(model: &StackModel, layer: usize, quarter_turns: i32) -> Result<StackModel> {
    if layer >= model.layers.len() {
        return Err(Error::Geometry(format!("layer {layer} does not exist")));
    }
    let turns = quarter_turns.rem_euclid(4) as u8;
    if turns % 2 == 1 && model.extent[0] != model.extent[1] {
        return Err(Error::Geometry(
            "quarter-turn rotation needs a square lateral extent".into(),
        ));
    }
    let mut out = model.clone();
    let l = &mut out.layers[layer];
    l.quarter_turns = (l.quarter_turns + turns) % 4;
    Ok(out)
}

/// Adds a column of `module_id` on every layer at each position.
pub fn insert_thermal_vias(
    model: &StackModel,
    positions: &[[f64; 2]],
    module_id: &str,
) -> Result<StackModel> {
    let module = model
        .library
        .get(module_id)
        .ok_or_else(|| Error::Reference(format!("module `{module_id}` is not in the library")))?
        .clone();
    let mut out = model.clone();
    for &[x, y] in positions {
        for layer in 0..out.layers.len() {
            if let Some(other) = out.footprints_collide(layer, x, y, &module) {
                return Err(Error::Geometry(format!(
                    "thermal via at ({x:e}, {y:e}) collides with module `{other}` on layer {layer}"
                )));
            }
            let turns = out.layers[layer].quarter_turns;
            let (bx, by) = unrotate_point(out.extent, turns, x, y);
            let p = Placement {
                module_id: module_id.to_string(),
                layer,
                x: bx,
                y: by,
                rotation: 0,
            };
            out.check_placement(&p)?;
            out.placements.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UM: f64 = 1e-6;

    fn library() -> ModuleLibrary {
        let mut lib = ModuleLibrary::new();
        lib.insert(
            "tv".into(),
            BasicModule {
                id: "tv".into(),
                footprint: Footprint::Square { side: 20.0 * UM },
                material: "copper".into(),
            },
        );
        lib
    }

    fn aligned_stack() -> StackModel {
        let a = 1000.0 * UM;
        let layers = (0..3).map(|_| Layer::new(100.0 * UM, "silicon")).collect();
        let sites = (0..3)
            .map(|layer| DeviceSite {
                layer,
                x: 200.0 * UM,
                y: 150.0 * UM,
                width: 100.0 * UM,
                height: 60.0 * UM,
                power: 0.5,
            })
            .collect();
        let placements = vec![Placement {
            module_id: "tv".into(),
            layer: 1,
            x: 700.0 * UM,
            y: 700.0 * UM,
            rotation: 0,
        }];
        assemble_stack([a, a], layers, None, placements, sites, library()).unwrap()
    }

    #[test]
    fn aligned_power_flagged() {
        let m = aligned_stack();
        assert!(m.has_vertically_aligned_power());
    }

    #[test]
    fn empty_stack_rejected() {
        assert!(assemble_stack([1.0, 1.0], vec![], None, vec![], vec![], library()).is_err());
    }

    #[test]
    fn unknown_module_and_out_of_bounds() {
        let layers = vec![Layer::new(1e-4, "silicon")];
        let p = Placement {
            module_id: "nope".into(),
            layer: 0,
            x: 0.5e-3,
            y: 0.5e-3,
            rotation: 0,
        };
        let r = assemble_stack([1e-3, 1e-3], layers.clone(), None, vec![p], vec![], library());
        assert!(matches!(r, Err(Error::Reference(_))));
        let p = Placement {
            module_id: "tv".into(),
            layer: 0,
            x: 0.0,
            y: 0.5e-3,
            rotation: 0,
        };
        let r = assemble_stack([1e-3, 1e-3], layers, None, vec![p], vec![], library());
        assert!(matches!(r, Err(Error::Geometry(_))));
    }

    #[test]
    fn quarter_turn_formula() {
        let m = aligned_stack();
        let r = rotate_layer(&m, 0, 1).unwrap();
        let s = &r.sites()[0];
        let a = m.extent[0];
        assert!((s.x - (a - 150.0 * UM)).abs() < 1e-15);
        assert!((s.y - 200.0 * UM).abs() < 1e-15);
        assert_eq!((s.width, s.height), (60.0 * UM, 100.0 * UM));
        // other layers untouched
        assert_eq!(r.sites()[1], m.sites()[1]);
    }

    #[test]
    fn four_turns_identity() {
        let m = aligned_stack();
        let mut r = m.clone();
        for _ in 0..4 {
            r = rotate_layer(&r, 1, 1).unwrap();
        }
        assert_eq!(r, m);
        assert_eq!(rotate_layer(&m, 2, 4).unwrap(), m);
    }

    #[test]
    fn rotating_lower_layers_breaks_alignment() {
        let m = aligned_stack();
        let r = rotate_layer(&rotate_layer(&m, 0, 1).unwrap(), 1, 1).unwrap();
        assert!(!r.has_vertically_aligned_power());
        assert!(r
            .placements()
            .iter()
            .filter(|p| p.layer == 1)
            .all(|p| p.rotation == 90));
    }

    #[test]
    fn non_square_rotation_rejected() {
        let layers = vec![Layer::new(1e-4, "silicon")];
        let m = assemble_stack([1e-3, 2e-3], layers, None, vec![], vec![], library()).unwrap();
        assert!(rotate_layer(&m, 0, 1).is_err());
        assert!(rotate_layer(&m, 0, 2).is_ok());
    }

    #[test]
    fn thermal_via_insertion() {
        let m = aligned_stack();
        assert_eq!(insert_thermal_vias(&m, &[], "tv").unwrap(), m);
        let v = insert_thermal_vias(&m, &[[300.0 * UM, 150.0 * UM]], "tv").unwrap();
        assert_eq!(v.placements().len(), m.placements().len() + 3);
        let clash = insert_thermal_vias(&m, &[[705.0 * UM, 700.0 * UM]], "tv");
        assert!(matches!(clash, Err(Error::Geometry(_))));
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = serde_json::to_string(&aligned_stack()).unwrap();
        let b = serde_json::to_string(&aligned_stack()).unwrap();
        assert_eq!(a, b);
    }
}
