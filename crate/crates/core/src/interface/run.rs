//! Scenario runner: executes configured stages and records a manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{
    build_stack, materials, AcStage, CouplingStage, EthermStage, ExtractCStage, ExtractZStage, ProjectConfig,
    ReduceStage, StageSpec, TfStage, ThermalStage,
};
use super::plot::{emit_cell_map, emit_plot, CsvTable, PlotStyle};
use super::spice::{export_spice_subckt, SpiceObject};
use crate::circuit::{
    ac_sweep, electro_thermal_solve, load_netlist, read_table_csv, transfer_function, EthermOptions, FreqTable,
    NetlistContext, TransferChain, ViaElement,
};
use crate::em::{
    coupling_sweep, discretize_filaments, extract_capacitance, solve_electrostatic, sweep_frequency, via_impedance,
    CouplingOptions, ElectrostaticOptions, ElectrostaticProblem, FilamentSolver, DEFAULT_REFERENCE_RADIUS,
};
use crate::error::{Error, Result};
use crate::model::{
    build_cross_section, insert_thermal_vias, rotate_layer, via_detail_model, CrossSection, MaskOptions,
    MaterialDb, PlacedShape, Primitive,
};
use crate::mor::{reduce_arnoldi, validate_reduction, write_reduced, ReducedModel, StateSpaceRC, ValidationOptions};
use crate::thermal::{
    extract_thermal_network, site_ports, site_power_map, slice_svg, solve_steady, temperature_csv, voxelize,
    ThermalModel, ThermalNetwork, VoxelOptions,
};

const DEFAULT_CELL: f64 = 0.25e-6;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Outputs go to `out_dir/<label>/`.
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Reserved; no stage is stochastic.
    pub seed: Option<u64>,
    /// Netlist and table paths are relative to this.
    pub base_dir: PathBuf,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            threads: 0,
            seed: None,
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub kind: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// sha256 of the canonical configuration TOML.
    pub config_hash: String,
    pub tool_version: String,
    pub threads: usize,
    pub seed: Option<u64>,
    pub succeeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// File names relative to the run directory, manifest excluded.
    pub outputs: Vec<String>,
    pub stages: Vec<StageTiming>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn config_hash(cfg: &ProjectConfig) -> Result<String> {
    let text = super::config::to_toml(cfg)?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs every stage of `scenario` plus the stages they depend on.
pub fn run_scenario(cfg: &ProjectConfig, scenario: &str, opts: &RunOptions) -> Result<RunManifest> {
    let sc = cfg
        .scenarios
        .get(scenario)
        .ok_or_else(|| Error::config(format!("undefined scenario `{scenario}`")))?;
    let names: Vec<String> = sc.stages.iter().map(|s| s.get_ref().clone()).collect();
    run_stages(cfg, scenario, &names, opts)
}

/// Runs the named stages, dependencies first, into `out_dir/<label>/`.
pub fn run_stages(cfg: &ProjectConfig, label: &str, stages: &[String], opts: &RunOptions) -> Result<RunManifest> {
    let order = schedule(cfg, stages)?;
    let hash = config_hash(cfg)?;
    let dir = opts.out_dir.join(label);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = RunManifest {
        scenario: label.to_string(),
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: opts.threads,
        seed: opts.seed,
        succeeded: true,
        error: None,
        outputs: Vec::new(),
        stages: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let mut runner = Runner {
        cfg,
        db: materials(cfg)?,
        opts,
        sink: Sink {
            dir: dir.clone(),
            written: Vec::new(),
        },
        r_tables: BTreeMap::new(),
        thermal: BTreeMap::new(),
    };
    let mut failure = None;
    for name in &order {
        let spec = &cfg.stages[name];
        let t0 = Instant::now();
        let r = pool.install(|| runner.stage(name, spec));
        manifest.stages.push(StageTiming {
            stage: name.clone(),
            kind: spec.verb().to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        if let Err(e) = r {
            failure = Some(Error::Stage {
                stage: name.clone(),
                source: Box::new(e),
            });
            break;
        }
    }
    let Some(err) = failure else {
        manifest.outputs = runner.sink.written;
        write_manifest(&dir.join(MANIFEST), &manifest)?;
        return Ok(manifest);
    };
    let mut kept = Vec::new();
    for f in &runner.sink.written {
        let partial = format!("{f}.partial");
        std::fs::rename(dir.join(f), dir.join(&partial)).map_err(|e| Error::io(dir.join(f), e))?;
        kept.push(partial);
    }
    manifest.outputs = kept;
    manifest.succeeded = false;
    manifest.error = Some(err.to_string());
    write_manifest(&dir.join(format!("{MANIFEST}.partial")), &manifest)?;
    Err(err)
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| Error::Export(format!("manifest: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Stage names in execution order; dependencies precede their users.
fn schedule(cfg: &ProjectConfig, stages: &[String]) -> Result<Vec<String>> {
    fn visit(cfg: &ProjectConfig, name: &str, stack: &mut Vec<String>, out: &mut Vec<String>) -> Result<()> {
        if out.iter().any(|s| s == name) {
            return Ok(());
        }
        if stack.iter().any(|s| s == name) {
            return Err(Error::config(format!("stage `{name}` depends on itself")));
        }
        let spec = cfg
            .stages
            .get(name)
            .ok_or_else(|| Error::config(format!("undefined stage `{name}`")))?;
        stack.push(name.to_string());
        for d in spec.dependencies() {
            visit(cfg, d.get_ref(), stack, out)?;
        }
        stack.pop();
        out.push(name.to_string());
        Ok(())
    }
    if stages.is_empty() {
        return Err(Error::config("nothing to run"));
    }
    let mut out = Vec::new();
    for s in stages {
        visit(cfg, s, &mut Vec::new(), &mut out)?;
    }
    Ok(out)
}

struct Sink {
    dir: PathBuf,
    written: Vec<String>,
}

impl Sink {
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn table(&mut self, name: &str, t: &CsvTable) -> Result<()> {
        self.write(name, &t.to_csv())
    }
}

struct Runner<'a> {
    cfg: &'a ProjectConfig,
    db: MaterialDb,
    opts: &'a RunOptions,
    sink: Sink,
    /// First-variant `(f, R)` of every finished `extract_z` stage.
    r_tables: BTreeMap<String, Vec<(f64, f64)>>,
    /// Full network and reduced model of every finished `reduce` stage.
    thermal: BTreeMap<String, (ThermalNetwork, ReducedModel)>,
}

fn single_primitive(cs: &CrossSection) -> Result<Primitive> {
    Ok(match cs {
        CrossSection::Circle { radius } => Primitive::Circle { radius: *radius },
        CrossSection::Rectangle { width, height } => Primitive::Rectangle {
            width: *width,
            height: *height,
        },
        CrossSection::Polygon { vertices } => Primitive::Polygon {
            vertices: vertices.clone(),
        },
        CrossSection::Composite(_) => return Err(Error::Input("needs a single-shape cross-section".into())),
    })
}

fn col(prefix: &str, name: &str) -> String {
    format!("{prefix}_{name}")
}

impl Runner<'_> {
    fn stage(&mut self, name: &str, spec: &StageSpec) -> Result<()> {
        match spec {
            StageSpec::ExtractZ(s) => self.extract_z(name, s),
            StageSpec::ExtractC(s) => self.extract_c(name, s),
            StageSpec::Coupling(s) => self.coupling(name, s),
            StageSpec::Thermal(s) => self.thermal(name, s),
            StageSpec::Reduce(s) => self.reduce(name, s),
            StageSpec::Ac(s) => self.ac(name, s),
            StageSpec::Tf(s) => self.tf(name, s),
            StageSpec::Etherm(s) => self.etherm(name, s),
        }
    }

    fn cross_section(&self, name: &str) -> Result<(CrossSection, f64, f64)> {
        let spec = self
            .cfg
            .cross_sections
            .get(name)
            .ok_or_else(|| Error::Reference(format!("cross-section `{name}`")))?;
        let m = self.db.get(spec.material.get_ref())?;
        Ok((spec.build()?, m.conductivity, m.relative_permittivity))
    }

    fn extract_z(&mut self, name: &str, s: &ExtractZStage) -> Result<()> {
        let freqs = s.frequencies.grid();
        let mut mask_opts = MaskOptions::new(s.cell_size.map_or(DEFAULT_CELL, |q| q.0));
        mask_opts.preserve_area = s.preserve_area;
        let r_ref = s.reference_radius.map_or(DEFAULT_REFERENCE_RADIUS, |q| q.0);
        let mut headers = vec!["frequency_hz".to_string()];
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for v in &s.variants {
            let (r, l) = if let Some(cs_name) = &v.cross_section {
                let (cs, sigma, _) = self.cross_section(cs_name.get_ref())?;
                let mask = build_cross_section(&cs, &mask_opts)?;
                let sigmas = vec![sigma; mask.group_count()];
                let mut sys = discretize_filaments(&mask, &sigmas, r_ref)?;
                if let Some(c) = &v.currents {
                    let c: Vec<Complex64> = c.iter().map(|&a| Complex64::new(a, 0.0)).collect();
                    sys.set_group_currents(&c)?;
                }
                if !s.density_at.is_empty() {
                    let solver = FilamentSolver::new(&sys)?;
                    let (nx, ny) = sys.mask_shape;
                    for (k, f) in s.density_at.iter().enumerate() {
                        let (_, map) = solver.solve(f.0)?;
                        let stem = format!("{name}_{}_density{k}", v.name);
                        self.sink.write(&format!("{stem}.csv"), &map.to_csv(&sys))?;
                        let cells: Vec<(usize, f64)> =
                            sys.cell_index.iter().zip(&map.normalized).map(|(&c, j)| (c, j.norm())).collect();
                        let title = format!("{}: |J|/J_avg at {:e} Hz", v.name, f.0);
                        self.sink.write(&format!("{stem}.svg"), &emit_cell_map(nx, ny, &cells, &title)?)?;
                    }
                }
                let t = sweep_frequency(&sys, &freqs)?;
                (t.r_eff, t.l_eff)
            } else {
                let via_name = v.via.as_ref().expect("checked at parse time").get_ref();
                let spec = &self.cfg.vias[via_name];
                let geom = via_detail_model(spec.level, &spec.params())?;
                let z = via_impedance(&geom, &self.db, &freqs, &mask_opts, r_ref)?;
                let l = freqs
                    .iter()
                    .zip(&z)
                    .map(|(&f, z)| if f > 0.0 { z.im / (2.0 * PI * f) } else { f64::NAN })
                    .collect();
                (z.iter().map(|z| z.re).collect(), l)
            };
            headers.push(col("r", &v.name));
            headers.push(col("l", &v.name));
            columns.push(r);
            columns.push(l);
        }
        let mut table = CsvTable::new(headers);
        for (k, &f) in freqs.iter().enumerate() {
            let mut row = vec![f];
            row.extend(columns.iter().map(|c| c[k]));
            table.rows.push(row);
        }
        self.sink.table(&format!("{name}_impedance.csv"), &table)?;
        let mut style = PlotStyle::new(&format!("{name}: resistance"), "frequency_hz");
        style.y = s.variants.iter().map(|v| col("r", &v.name)).collect();
        style.x_label = "frequency (Hz)".into();
        style.y_label = "R (Ω or Ω/m)".into();
        style.log_x = true;
        self.sink.write(&format!("{name}_resistance.svg"), &emit_plot(&table, &style)?)?;
        let r0: Vec<(f64, f64)> = freqs.iter().copied().zip(columns[0].iter().copied()).collect();
        self.r_tables.insert(name.to_string(), r0);
        Ok(())
    }

    fn extract_c(&mut self, name: &str, s: &ExtractCStage) -> Result<()> {
        let (cs, _, _) = self.cross_section(s.cross_section.get_ref())?;
        let prim = single_primitive(&cs)?;
        let eps = self.db.get(s.background.get_ref())?.relative_permittivity;
        let mut opts = ElectrostaticOptions::default();
        if let Some(n) = s.nodes {
            opts.nodes = n;
        }
        let mut table = CsvTable::new(vec!["distance_m".into(), "c_f_per_m".into()]);
        for d in &s.distances {
            let part = |x: f64, g| PlacedShape::new(prim.clone(), [x, 0.0], g);
            let problem = ElectrostaticProblem {
                conductors: vec![part(-0.5 * d.0, 0), part(0.5 * d.0, 1)],
                potentials: vec![0.5, -0.5],
                background_eps_r: eps,
                dielectrics: Vec::new(),
            };
            let field = solve_electrostatic(&problem, &opts)?;
            table.rows.push(vec![d.0, extract_capacitance(&field)?]);
        }
        self.sink.table(&format!("{name}_capacitance.csv"), &table)?;
        let mut style = PlotStyle::new(&format!("{name}: capacitance"), "distance_m");
        style.y = vec!["c_f_per_m".into()];
        style.x_label = "center distance (m)".into();
        style.y_label = "C (F/m)".into();
        self.sink.write(&format!("{name}_capacitance.svg"), &emit_plot(&table, &style)?)
    }

    fn coupling(&mut self, name: &str, s: &CouplingStage) -> Result<()> {
        let spec = &self.cfg.cross_sections[s.cross_section.get_ref()];
        let cs = spec.build()?;
        let via_mat = self.db.get(spec.material.get_ref())?.clone();
        let substrate = self.db.get(s.substrate.get_ref())?.clone();
        let mut opts = CouplingOptions {
            frequency: s.frequency.0,
            ..CouplingOptions::default()
        };
        if let Some(c) = s.cell_size {
            opts.cell_size = c.0;
        }
        if let Some(n) = s.nodes {
            opts.electrostatic.nodes = n;
        }
        let distances: Vec<f64> = s.distances.iter().map(|d| d.0).collect();
        let table = coupling_sweep(&cs, &via_mat, &substrate, &distances, &opts)?;
        let csv = table.to_csv();
        self.sink.write(&format!("{name}_coupling.csv"), &csv)?;
        let parsed = CsvTable::parse(&csv)?;
        let mut style = PlotStyle::new(&format!("{name}: coupling resistance"), "distance_m");
        style.y = vec!["rk_ohm_per_m".into()];
        style.x_label = "center distance (m)".into();
        style.y_label = "R_k (Ω/m)".into();
        self.sink.write(&format!("{name}_coupling.svg"), &emit_plot(&parsed, &style)?)?;
        if let Some(x) = &s.export {
            let row = table
                .rows
                .iter()
                .min_by(|a, b| (a.distance - x.distance.0).abs().total_cmp(&(b.distance - x.distance.0).abs()))
                .expect("sweep is non-empty");
            let text = export_spice_subckt(SpiceObject::Coupling { row, length: x.length.0 }, name)?;
            self.sink.write(&format!("{name}.sub"), &text)?;
        }
        Ok(())
    }

    fn thermal(&mut self, name: &str, s: &ThermalStage) -> Result<()> {
        let base = build_stack(self.cfg, s.stack.get_ref())?;
        let vox = voxel_options(s.budget, &s.boundaries);
        let pitch = s.pitch.map(|q| q.0);
        let mut summary = String::from(
            "variant,t_max_k,hotspot_x_m,hotspot_y_m,hotspot_z_m,injected_w,boundary_w,iterations\n",
        );
        for v in &s.variants {
            let mut model = base.clone();
            for r in &v.rotate {
                model = rotate_layer(&model, r.layer, r.quarter_turns)?;
            }
            if let Some(tv) = &v.thermal_vias {
                let pos: Vec<[f64; 2]> = tv.positions.iter().map(|p| [p[0].0, p[1].0]).collect();
                model = insert_thermal_vias(&model, &pos, tv.module.get_ref())?;
            }
            let (grid, layout) = voxelize(&model, &self.db, pitch, &vox)?;
            let power = site_power_map(&model, &grid, &layout)?;
            let sol = solve_steady(&grid, &power)?;
            let c = grid.center(sol.hotspot);
            summary.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
                v.name, sol.t_max, c[0], c[1], c[2], sol.injected_power, sol.boundary_heat_flow, sol.iterations
            ));
            let (_, _, z) = grid.coords(sol.hotspot);
            let title = format!("{}: slice {z}", v.name);
            self.sink
                .write(&format!("{name}_{}_slice.svg", v.name), &slice_svg(&grid, &sol.temperature, z, &title))?;
            if s.write_field {
                self.sink
                    .write(&format!("{name}_{}_field.csv", v.name), &temperature_csv(&grid, &sol.temperature))?;
            }
        }
        self.sink.write(&format!("{name}_summary.csv"), &summary)
    }

    fn reduce(&mut self, name: &str, s: &ReduceStage) -> Result<()> {
        let model = build_stack(self.cfg, s.stack.get_ref())?;
        let vox = voxel_options(s.budget, &s.boundaries);
        let (grid, layout) = voxelize(&model, &self.db, s.pitch.map(|q| q.0), &vox)?;
        let ports = site_ports(&model, &grid, &layout)?;
        let net = extract_thermal_network(&grid, &ports)?;
        let sys = StateSpaceRC::from_network(&net);
        let red = reduce_arnoldi(&sys, s.order)?;
        self.sink.write(&format!("{name}.rom"), &write_reduced(&red))?;
        self.sink
            .write(&format!("{name}.sub"), &export_spice_subckt(SpiceObject::Reduced(&red), name)?)?;
        if let Some(v) = &s.validate {
            let mut o = ValidationOptions::step(v.amplitudes.iter().map(|a| a.0).collect(), v.t_end.0, v.steps);
            o.frequencies = v.frequencies.iter().map(|f| f.0).collect();
            o.frequency_points = v.frequency_points;
            let report = validate_reduction(&sys, &red, &o)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Export(e.to_string()))?;
            self.sink.write(&format!("{name}_validation.json"), &(text + "\n"))?;
        }
        self.thermal.insert(name.to_string(), (net, red));
        Ok(())
    }

    fn netlist_ctx(&self) -> NetlistContext {
        NetlistContext {
            base_dir: Some(self.opts.base_dir.clone()),
            ..NetlistContext::default()
        }
    }

    fn ac(&mut self, name: &str, s: &AcStage) -> Result<()> {
        let net = load_netlist(&self.opts.base_dir.join(&s.netlist), &self.netlist_ctx())?;
        let freqs = s.frequencies.grid();
        let res = ac_sweep(&net, &freqs)?;
        let nodes: Vec<String> = if s.nodes.is_empty() {
            res.node_names.iter().filter(|n| n.as_str() != "0").cloned().collect()
        } else {
            s.nodes.clone()
        };
        let mut headers = vec!["frequency_hz".to_string()];
        let mut cols = Vec::new();
        for n in &nodes {
            let v = res
                .voltage(n)
                .ok_or_else(|| Error::Reference(format!("node `{n}` is not in the netlist")))?;
            headers.push(col("mag", n));
            headers.push(col("phase_deg", n));
            cols.push(v);
        }
        let mut table = CsvTable::new(headers);
        for (k, &f) in freqs.iter().enumerate() {
            let mut row = vec![f];
            for v in &cols {
                row.push(v[k].norm());
                row.push(v[k].arg().to_degrees());
            }
            table.rows.push(row);
        }
        self.sink.table(&format!("{name}_ac.csv"), &table)?;
        let mut style = PlotStyle::new(&format!("{name}: AC magnitude"), "frequency_hz");
        style.y = nodes.iter().map(|n| col("mag", n)).collect();
        style.x_label = "frequency (Hz)".into();
        style.y_label = "|V| (V)".into();
        style.log_x = true;
        self.sink.write(&format!("{name}_ac.svg"), &emit_plot(&table, &style)?)
    }

    fn tf(&mut self, name: &str, s: &TfStage) -> Result<()> {
        let freqs = s.frequencies.grid();
        let line1 = s.line.into();
        let line2 = s.line2.unwrap_or(s.line).into();
        let mut models = vec![
            ("short", ViaElement::Short),
            ("fixed", ViaElement::Resistor(s.via_resistance.0)),
        ];
        let points = if let Some(src) = &s.table_from {
            let r = &self.r_tables[src.get_ref()];
            let r_dc = r[0].1;
            Some(r.iter().map(|&(f, v)| (f, v / r_dc * s.via_resistance.0)).collect::<Vec<_>>())
        } else if let Some(path) = &s.table {
            let p = self.opts.base_dir.join(path);
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            Some(read_table_csv(&text)?)
        } else {
            None
        };
        if let Some(p) = points {
            models.push(("table", ViaElement::Table(FreqTable::new(&p, s.clamp)?)));
        }
        let mut headers = vec!["frequency_hz".to_string()];
        let mut results = Vec::new();
        let mut cutoff = String::from("model,cutoff_hz\n");
        for (label, via) in models {
            let chain = TransferChain {
                source_resistance: s.source_resistance.0,
                line1,
                via,
                line2,
                load_resistance: s.load_resistance.0,
            };
            let r = transfer_function(&chain, &freqs)?;
            cutoff.push_str(&format!("{label},{}\n", r.cutoff().map_or("none".to_string(), |f| format!("{f:e}"))));
            headers.push(col("mag", label));
            results.push(r);
        }
        let mut table = CsvTable::new(headers);
        for (k, &f) in freqs.iter().enumerate() {
            let mut row = vec![f];
            row.extend(results.iter().map(|r| r.h[k].norm()));
            table.rows.push(row);
        }
        self.sink.table(&format!("{name}_transfer.csv"), &table)?;
        self.sink.write(&format!("{name}_cutoff.csv"), &cutoff)?;
        let mut style = PlotStyle::new(&format!("{name}: |H|"), "frequency_hz");
        style.y = table.headers[1..].to_vec();
        style.x_label = "frequency (Hz)".into();
        style.y_label = "|H|".into();
        style.log_x = true;
        self.sink.write(&format!("{name}_transfer.svg"), &emit_plot(&table, &style)?)
    }

    fn etherm(&mut self, name: &str, s: &EthermStage) -> Result<()> {
        let net = load_netlist(&self.opts.base_dir.join(&s.netlist), &self.netlist_ctx())?;
        let (full, red) = &self.thermal[s.thermal_from.get_ref()];
        let model: &dyn ThermalModel = if s.full_network { full } else { red };
        let mut opts = EthermOptions::default();
        if let Some(t) = s.tolerance {
            opts.tolerance = t;
        }
        if let Some(m) = s.max_iterations {
            opts.max_iterations = m;
        }
        if let Some(a) = s.relaxation {
            opts.relaxation = a;
        }
        let (dc, state) = electro_thermal_solve(&net, model, &opts)?;
        let mut dev = String::from("device,temperature_k,power_w\n");
        for ((d, t), p) in state.devices.iter().zip(&state.temperatures).zip(&state.powers) {
            dev.push_str(&format!("{d},{t:e},{p:e}\n"));
        }
        self.sink.write(&format!("{name}_devices.csv"), &dev)?;
        let mut nodes = String::from("node,voltage_v\n");
        for n in net.node_names() {
            if let Some(v) = dc.voltage(n) {
                nodes.push_str(&format!("{n},{v:e}\n"));
            }
        }
        self.sink.write(&format!("{name}_dc.csv"), &nodes)?;
        let text = serde_json::to_string_pretty(&state).map_err(|e| Error::Export(e.to_string()))?;
        self.sink.write(&format!("{name}_etherm.json"), &(text + "\n"))
    }
}

fn voxel_options(budget: Option<usize>, b: &super::config::BoundarySpec) -> VoxelOptions {
    let mut v = VoxelOptions {
        boundaries: b.faces(),
        ..VoxelOptions::default()
    };
    if let Some(n) = budget {
        v.budget = n;
    }
    v
}
