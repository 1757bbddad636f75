use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Material, MaterialDb, StackModel};

pub const DEFAULT_VOXEL_BUDGET: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Fixed { temperature: f64 },
    Adiabatic,
    Convective { h: f64, ambient: f64 },
}

/// Face order: x−, x+, y−, y+, z− (bottom), z+ (top).
pub type Boundaries = [BoundaryCondition; 6];

/// Heatsink at 300 K under the stack, every other face adiabatic.
pub fn default_boundaries() -> Boundaries {
    let a = BoundaryCondition::Adiabatic;
    [a, a, a, a, BoundaryCondition::Fixed { temperature: 300.0 }, a]
}

/// Regular voxel grid, uniform in x and y, layer-conforming in z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    /// Thickness of every z slice, bottom to top.
    pub dz: Vec<f64>,
    pub palette: Vec<Material>,
    /// Palette index per voxel, linear index `(z * ny + y) * nx + x`.
    pub material: Vec<u16>,
    pub boundaries: Boundaries,
}

impl VoxelGrid {
    /// Uniform grid of one material.
    pub fn uniform(
        n: [usize; 3],
        pitch: [f64; 3],
        material: Material,
        boundaries: Boundaries,
    ) -> Result<Self> {
        let g = VoxelGrid {
            nx: n[0],
            ny: n[1],
            nz: n[2],
            dx: pitch[0],
            dy: pitch[1],
            dz: vec![pitch[2]; n[2]],
            palette: vec![material],
            material: vec![0; n[0] * n[1] * n[2]],
            boundaries,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Geometry("voxel grid is empty".into()));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) || self.dz.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Geometry("voxel pitch must be > 0".into()));
        }
        if self.dz.len() != self.nz || self.material.len() != self.len() {
            return Err(Error::Geometry("voxel grid arrays have inconsistent sizes".into()));
        }
        if self.material.iter().any(|&m| m as usize >= self.palette.len()) {
            return Err(Error::Geometry("voxel references a missing material".into()));
        }
        for m in &self.palette {
            m.validate()?;
        }
        for b in &self.boundaries {
            match *b {
                BoundaryCondition::Fixed { temperature } if !(temperature > 0.0) => {
                    return Err(Error::Input("fixed boundary temperature must be > 0 K".into()))
                }
                BoundaryCondition::Convective { h, ambient } if !(h > 0.0 && ambient > 0.0) => {
                    return Err(Error::Input(
                        "convective boundary needs h > 0 and ambient > 0 K".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        (i % self.nx, (i / self.nx) % self.ny, i / (self.nx * self.ny))
    }

    /// z of the bottom of every slice plus the top of the grid.
    pub fn z_edges(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.nz + 1);
        let mut z = 0.0;
        v.push(z);
        for d in &self.dz {
            z += d;
            v.push(z);
        }
        v
    }

    pub fn center(&self, i: usize) -> [f64; 3] {
        let (x, y, z) = self.coords(i);
        let ze = self.z_edges();
        [
            (x as f64 + 0.5) * self.dx,
            (y as f64 + 0.5) * self.dy,
            0.5 * (ze[z] + ze[z + 1]),
        ]
    }

    pub fn volume(&self, i: usize) -> f64 {
        let (_, _, z) = self.coords(i);
        self.dx * self.dy * self.dz[z]
    }

    pub fn material_of(&self, i: usize) -> &Material {
        &self.palette[self.material[i] as usize]
    }

    pub fn has_heat_path(&self) -> bool {
        self.boundaries
            .iter()
            .any(|b| !matches!(b, BoundaryCondition::Adiabatic))
    }

    /// Temperature of the first non-adiabatic face; used as the solve offset.
    pub fn reference_temperature(&self) -> f64 {
        self.boundaries
            .iter()
            .find_map(|b| match *b {
                BoundaryCondition::Fixed { temperature } => Some(temperature),
                BoundaryCondition::Convective { ambient, .. } => Some(ambient),
                BoundaryCondition::Adiabatic => None,
            })
            .unwrap_or(300.0)
    }

    /// Voxel indices of slice `z` whose centers lie in the rectangle.
    pub fn voxels_in_rect(&self, z: usize, rect: [f64; 4]) -> Vec<usize> {
        let mut v = Vec::new();
        for y in 0..self.ny {
            let cy = (y as f64 + 0.5) * self.dy;
            if cy < rect[2] || cy > rect[3] {
                continue;
            }
            for x in 0..self.nx {
                let cx = (x as f64 + 0.5) * self.dx;
                if cx >= rect[0] && cx <= rect[1] {
                    v.push(self.index(x, y, z));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelOptions {
    pub budget: usize,
    pub boundaries: Boundaries,
}

impl Default for VoxelOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_VOXEL_BUDGET,
            boundaries: default_boundaries(),
        }
    }
}

/// z slices of each die and bond layer, bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSlices {
    /// `[first, end)` slice range of die `i`.
    pub die: Vec<[usize; 2]>,
    /// Slice range of the bond above die `i` (`None` for the top die).
    pub bond: Vec<Option<[usize; 2]>>,
}

fn slices(thickness: f64, pitch: f64, what: &str) -> Result<usize> {
    let n = (thickness / pitch).round();
    if n < 1.0 {
        return Err(Error::Geometry(format!(
            "{what} of thickness {thickness:e} is thinner than half a voxel pitch {pitch:e}"
        )));
    }
    Ok(n as usize)
}

/// Rasterizes the stack; each voxel takes the material at its center.
pub fn voxelize(
    model: &StackModel,
    materials: &MaterialDb,
    pitch: [f64; 3],
    opts: &VoxelOptions,
) -> Result<(VoxelGrid, LayerSlices)> {
    if pitch.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Geometry("voxel pitch must be > 0".into()));
    }
    let nx = slices(model.extent[0], pitch[0], "stack width")?;
    let ny = slices(model.extent[1], pitch[1], "stack depth")?;
    let mut dz = Vec::new();
    let mut layout = LayerSlices {
        die: Vec::new(),
        bond: Vec::new(),
    };
    let mut z_material = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let n = slices(layer.thickness, pitch[2], &format!("layer {i}"))?;
        layout.die.push([dz.len(), dz.len() + n]);
        dz.extend(std::iter::repeat_n(layer.thickness / n as f64, n));
        z_material.extend(std::iter::repeat_n(layer.material.clone(), n));
        match (&model.interlayer, i + 1 < model.layers.len()) {
            (Some(il), true) => {
                let n = slices(il.thickness, pitch[2], "interlayer")?;
                layout.bond.push(Some([dz.len(), dz.len() + n]));
                dz.extend(std::iter::repeat_n(il.thickness / n as f64, n));
                z_material.extend(std::iter::repeat_n(il.material.clone(), n));
            }
            _ => layout.bond.push(None),
        }
    }
    let nz = dz.len();
    let count = nx.saturating_mul(ny).saturating_mul(nz);
    if count > opts.budget {
        let s = (count as f64 / opts.budget as f64).cbrt();
        return Err(Error::Resource(format!(
            "{count} voxels exceed the budget of {}; try a pitch of about {:.3e} x {:.3e} x {:.3e} m",
            opts.budget,
            pitch[0] * s,
            pitch[1] * s,
            pitch[2] * s
        )));
    }

    let mut palette: Vec<Material> = Vec::new();
    let pal_index = |name: &str, palette: &mut Vec<Material>| -> Result<u16> {
        if let Some(k) = palette.iter().position(|m| m.name == name) {
            return Ok(k as u16);
        }
        palette.push(materials.get(name)?.clone());
        Ok((palette.len() - 1) as u16)
    };
    let mut material = vec![0u16; nx * ny * nz];
    for z in 0..nz {
        let m = pal_index(&z_material[z], &mut palette)?;
        material[z * nx * ny..(z + 1) * nx * ny].fill(m);
    }
    let dx = model.extent[0] / nx as f64;
    let dy = model.extent[1] / ny as f64;
    for p in model.placements() {
        let module = &model.library[&p.module_id];
        let m = pal_index(&module.material, &mut palette)?;
        let mut zr = layout.die[p.layer];
        if let Some(b) = layout.bond[p.layer] {
            zr[1] = b[1];
        }
        let hw = module.footprint.half_width();
        let x0 = (((p.x - hw) / dx).floor().max(0.0)) as usize;
        let x1 = ((((p.x + hw) / dx).ceil()) as usize).min(nx);
        let y0 = (((p.y - hw) / dy).floor().max(0.0)) as usize;
        let y1 = ((((p.y + hw) / dy).ceil()) as usize).min(ny);
        let mut hit = false;
        for y in y0..y1 {
            for x in x0..x1 {
                let cx = (x as f64 + 0.5) * dx;
                let cy = (y as f64 + 0.5) * dy;
                if module.footprint.contains(cx - p.x, cy - p.y) {
                    hit = true;
                    for z in zr[0]..zr[1] {
                        material[(z * ny + y) * nx + x] = m;
                    }
                }
            }
        }
        if !hit {
            return Err(Error::Geometry(format!(
                "module `{}` at ({:e}, {:e}) covers no voxel center; refine the pitch",
                p.module_id, p.x, p.y
            )));
        }
    }
    let grid = VoxelGrid {
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
        palette,
        material,
        boundaries: opts.boundaries,
    };
    grid.validate()?;
    Ok((grid, layout))
}

/// Power waveform, W over s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Constant { value: f64 },
    Step { delay: f64, value: f64 },
    /// `(t, P)` pairs, linear in between, held outside.
    Pwl { points: Vec<[f64; 2]> },
}

impl Waveform {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Step { delay, value } => {
                if t >= *delay {
                    *value
                } else {
                    0.0
                }
            }
            Waveform::Pwl { points } => {
                let Some(first) = points.first() else { return 0.0 };
                if t <= first[0] {
                    return first[1];
                }
                for w in points.windows(2) {
                    if t <= w[1][0] {
                        let s = (t - w[0][0]) / (w[1][0] - w[0][0]);
                        return w[0][1] + s * (w[1][1] - w[0][1]);
                    }
                }
                points.last().map_or(0.0, |p| p[1])
            }
        }
    }

    /// Value held after all transitions.
    pub fn final_value(&self) -> f64 {
        match self {
            Waveform::Constant { value } | Waveform::Step { value, .. } => *value,
            Waveform::Pwl { points } => points.last().map_or(0.0, |p| p[1]),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Waveform::Constant { value } | Waveform::Step { value, .. } => *value >= 0.0,
            Waveform::Pwl { points } => {
                points.iter().all(|p| p[1] >= 0.0) && points.windows(2).all(|w| w[1][0] > w[0][0])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input("power must be >= 0 with increasing PWL times".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSource {
    pub voxels: Vec<usize>,
    pub waveform: Waveform,
}

/// Heat sources. Each source spreads its power over its voxels by volume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerMap {
    pub sources: Vec<PowerSource>,
}

impl PowerMap {
    pub fn constant(voxels: Vec<usize>, power: f64) -> Self {
        Self {
            sources: vec![PowerSource {
                voxels,
                waveform: Waveform::Constant { value: power },
            }],
        }
    }

    pub fn validate(&self, grid: &VoxelGrid) -> Result<()> {
        for s in &self.sources {
            s.waveform.validate()?;
            if s.voxels.is_empty() {
                return Err(Error::Input("power source has no voxels".into()));
            }
            if s.voxels.iter().any(|&v| v >= grid.len()) {
                return Err(Error::Input("power source voxel outside the grid".into()));
            }
        }
        Ok(())
    }

    /// Nodal power vector at time `t` (`None` for the steady value).
    pub fn nodal(&self, grid: &VoxelGrid, t: Option<f64>) -> Vec<f64> {
        let mut p = vec![0.0; grid.len()];
        for s in &self.sources {
            let total = match t {
                Some(t) => s.waveform.at(t),
                None => s.waveform.final_value(),
            };
            let vol: f64 = s.voxels.iter().map(|&v| grid.volume(v)).sum();
            for &v in &s.voxels {
                p[v] += total * grid.volume(v) / vol;
            }
        }
        p
    }

    pub fn total(&self) -> f64 {
        self.sources.iter().map(|s| s.waveform.final_value()).sum()
    }
}

/// Power sources for the device sites of a stack, on the top slice of their die.
pub fn site_power_map(model: &StackModel, grid: &VoxelGrid, layout: &LayerSlices) -> Result<PowerMap> {
    let mut map = PowerMap::default();
    for s in model.sites() {
        let z = layout.die[s.layer][1] - 1;
        let voxels = grid.voxels_in_rect(z, s.rect());
        if voxels.is_empty() {
            return Err(Error::Geometry(format!(
                "device site at ({:e}, {:e}) covers no voxel center",
                s.x, s.y
            )));
        }
        map.sources.push(PowerSource {
            voxels,
            waveform: Waveform::Constant { value: s.power },
        });
    }
    Ok(map)
}

/// Named observation/injection region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub voxels: Vec<usize>,
}

/// Ports at the device sites, named `site<k>`.
pub fn site_ports(model: &StackModel, grid: &VoxelGrid, layout: &LayerSlices) -> Result<Vec<Port>> {
    let map = site_power_map(model, grid, layout)?;
    Ok(map
        .sources
        .into_iter()
        .enumerate()
        .map(|(k, s)| Port {
            name: format!("site{k}"),
            voxels: s.voxels,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_stack, BasicModule, Footprint, Layer, ModuleLibrary, Placement};

    fn stack(pitch_layers: f64) -> StackModel {
        let mut lib = ModuleLibrary::new();
        lib.insert(
            "via".into(),
            BasicModule {
                id: "via".into(),
                footprint: Footprint::Square { side: 20e-6 },
                material: "copper".into(),
            },
        );
        let layers = (0..3).map(|_| Layer::new(pitch_layers, "silicon")).collect();
        let p = Placement {
            module_id: "via".into(),
            layer: 1,
            x: 50e-6,
            y: 50e-6,
            rotation: 0,
        };
        assemble_stack([200e-6, 200e-6], layers, None, vec![p], vec![], lib).unwrap()
    }

    #[test]
    fn homogeneous_layer_is_all_silicon() {
        let m = assemble_stack(
            [100e-6, 100e-6],
            vec![Layer::new(50e-6, "silicon")],
            None,
            vec![],
            vec![],
            ModuleLibrary::new(),
        )
        .unwrap();
        let (g, _) = voxelize(&m, &MaterialDb::builtin(), [10e-6; 3], &VoxelOptions::default()).unwrap();
        assert!(g.material.iter().all(|&k| g.palette[k as usize].name == "silicon"));
        assert_eq!(g.len(), 10 * 10 * 5);
    }

    #[test]
    fn via_column_through_its_layer() {
        let (g, l) = voxelize(&stack(40e-6), &MaterialDb::builtin(), [10e-6; 3], &VoxelOptions::default())
            .unwrap();
        let [z0, z1] = l.die[1];
        for z in 0..g.nz {
            let name = &g.material_of(g.index(5, 5, z)).name;
            assert_eq!(name == "copper", z >= z0 && z < z1, "z={z}");
        }
    }

    #[test]
    fn halving_pitch_octuples_count() {
        let db = MaterialDb::builtin();
        let (a, _) = voxelize(&stack(40e-6), &db, [20e-6; 3], &VoxelOptions::default()).unwrap();
        let (b, _) = voxelize(&stack(40e-6), &db, [10e-6; 3], &VoxelOptions::default()).unwrap();
        assert_eq!(b.len(), 8 * a.len());
    }

    #[test]
    fn budget_error_suggests_pitch() {
        let o = VoxelOptions {
            budget: 100,
            ..Default::default()
        };
        let e = voxelize(&stack(40e-6), &MaterialDb::builtin(), [10e-6; 3], &o).unwrap_err();
        assert!(matches!(e, Error::Resource(ref m) if m.contains("pitch")));
    }

    #[test]
    fn pwl_waveform() {
        let w = Waveform::Pwl {
            points: vec![[0.0, 0.0], [1.0, 2.0]],
        };
        assert_eq!(w.at(0.5), 1.0);
        assert_eq!(w.at(5.0), 2.0);
        assert_eq!(w.final_value(), 2.0);
    }
}
