//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use viaflow::circuit::{
    ac_sweep, dc_solve, electro_thermal_solve, parse_netlist, EthermOptions, NetlistContext,
};
use viaflow::em::{
    discretize_filaments, extract_capacitance, solve_electrostatic, sweep_frequency, ElectrostaticOptions,
    ElectrostaticProblem, DEFAULT_REFERENCE_RADIUS,
};
use viaflow::interface::config::parse_config;
use viaflow::interface::{export_spice_subckt, run_stages, to_toml, parse_config_str, RunManifest, RunOptions, SpiceObject};
use viaflow::model::{build_cross_section, CrossSection, MaskOptions, Material};
use viaflow::mor::{dc_gain, reduce_arnoldi, RcSystem, StateSpaceRC};
use viaflow::thermal::{
    extract_thermal_network, solve_steady, solve_transient, BoundaryCondition, Port, PowerMap, PowerSource,
    TransientOptions, VoxelGrid, Waveform,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const MU_0: f64 = 4.0e-7 * PI;
const EPS_0: f64 = 8.854_187_812_8e-12;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn workspace_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Columns of a CSV file keyed by header.
fn read_columns(path: &Path) -> BTreeMap<String, Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<String>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        for (h, v) in headers.iter().zip(rec.unwrap().iter()) {
            cols.get_mut(h).unwrap().push(v.to_string());
        }
    }
    cols
}

fn numeric(cols: &BTreeMap<String, Vec<String>>, key: &str) -> Vec<f64> {
    cols.get(key)
        .unwrap_or_else(|| panic!("missing column {key}"))
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

/// One run of the demo stages shared by several criteria.
struct DemoRun {
    dir: PathBuf,
    manifest: RunManifest,
    _tmp: tempfile::TempDir,
}

fn demo_run() -> &'static DemoRun {
    static RUN: OnceLock<DemoRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = parse_config(&workspace_configs().join("demo.toml")).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let mut opts = RunOptions::new(tmp.path());
        opts.threads = 1;
        opts.base_dir = workspace_configs();
        let stages: Vec<String> = ["transfer", "shapes", "hotspot"].iter().map(|s| s.to_string()).collect();
        let manifest = run_stages(&cfg, "acceptance", &stages, &opts).unwrap();
        DemoRun {
            dir: tmp.path().join("acceptance"),
            manifest,
            _tmp: tmp,
        }
    })
}

/// Internal resistance ratio of a round wire, `Re[k a J0(k a) / (2 J1(k a))]`
/// with `k = (1 − j)/δ`, summed as power series.
fn round_wire_ratio(radius: f64, sigma: f64, f: f64) -> f64 {
    if f == 0.0 {
        return 1.0;
    }
    let delta = (1.0 / (PI * f * MU_0 * sigma)).sqrt();
    let z = Complex64::new(1.0, -1.0) * (radius / delta);
    let h = z * 0.5;
    let h2 = h * h;
    let (mut j0, mut j1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let (mut t0, mut t1) = (Complex64::new(1.0, 0.0), h);
    for m in 1..2000 {
        j0 += t0;
        j1 += t1;
        let mf = m as f64;
        t0 = -t0 * h2 / (mf * mf);
        t1 = -t1 * h2 / (mf * (mf + 1.0));
        if m > 4 && t0.norm() < 1e-17 * j0.norm() && t1.norm() < 1e-17 * j1.norm() {
            break;
        }
    }
    (z * j0 / (2.0 * j1)).re
}

fn kelvin() -> Outcome {
    let (d, sigma, cell) = (10e-6, 5.8e7, 0.25e-6);
    let start = Instant::now();
    let opts = MaskOptions {
        preserve_area: true,
        ..MaskOptions::new(cell)
    };
    let mask = ok(build_cross_section(&CrossSection::circle_diameter(d), &opts))?;
    let sys = ok(discretize_filaments(&mask, &[sigma], DEFAULT_REFERENCE_RADIUS))?;
    let freqs = log_grid(1e6, 1e10, 40);
    let t = ok(sweep_frequency(&sys, &freqs))?;
    let secs = start.elapsed().as_secs_f64();
    let r_dc = 1.0 / (sigma * PI * 0.25 * d * d);
    let mut worst: f64 = 0.0;
    for (f, r) in freqs.iter().zip(&t.r_eff) {
        worst = worst.max((r / (r_dc * round_wire_ratio(0.5 * d, sigma, *f)) - 1.0).abs());
    }
    ensure(sys.len() >= 1000, format!("{} filaments", sys.len()))?;
    ensure(worst <= 0.03, format!("max deviation {:.2}%", 100.0 * worst))?;
    ensure(secs < 60.0, format!("sweep took {secs:.1} s"))?;
    Ok(format!("{} filaments, max deviation {:.2}%, {secs:.1} s", sys.len(), 100.0 * worst))
}

fn subdivision() -> Outcome {
    let run = demo_run();
    let c = read_columns(&run.dir.join("subdivision_impedance.csv"));
    let f = numeric(&c, "frequency_hz");
    let single = numeric(&c, "r_single");
    let quad20 = numeric(&c, "r_quad20");
    let quad05 = numeric(&c, "r_quad05");
    ensure(single.windows(2).all(|w| w[1] >= w[0]), "single via R(f) not monotone")?;
    for k in 0..f.len() {
        ensure(
            quad20[k] <= single[k] * (1.0 + 1e-9),
            format!("quad20 above single at {:e} Hz", f[k]),
        )?;
        if f[k] > 1e9 {
            ensure(quad20[k] < single[k], format!("quad20 not below single at {:e} Hz", f[k]))?;
        }
    }
    let last = f.len() - 1;
    let gap = (quad05[last] / single[last] - 1.0).abs();
    ensure(gap <= 0.05, format!("0.5 um spacing is {:.2}% off single at 10 GHz", 100.0 * gap))?;
    Ok(format!(
        "R(10 GHz): single {:.1}, 20 um {:.1}, 0.5 um {:.1} ohm/m ({:.2}% off)",
        single[last],
        quad20[last],
        quad05[last],
        100.0 * gap
    ))
}

fn shapes() -> Outcome {
    let run = demo_run();
    let c = read_columns(&run.dir.join("shapes_impedance.csv"));
    let f = numeric(&c, "frequency_hz");
    let ring = numeric(&c, "r_ring");
    let solid = numeric(&c, "r_solid");
    let same = numeric(&c, "r_center_same");
    let absent = numeric(&c, "r_center_absent");
    let opposite = numeric(&c, "r_center_opposite");
    ensure(f[0] == 0.0 && ring[0] > solid[0], "smaller-area ring does not start above solid")?;
    let cross = ring
        .iter()
        .zip(&solid)
        .position(|(r, s)| r <= s)
        .ok_or("ring never drops to the solid resistance")?;
    ensure(
        ring[cross..].iter().zip(&solid[cross..]).all(|(r, s)| r <= s),
        "ring rises above solid again after the crossover",
    )?;
    let last = f.len() - 1;
    ensure(opposite[0] > same[0], "opposite center current does not start above same direction")?;
    ensure(
        opposite[last] < same[last] && opposite[last] < absent[last],
        "opposite center current is not the lowest at high frequency",
    )?;
    let below = (0..f.len())
        .position(|k| (k..f.len()).all(|j| opposite[j] < same[j] && opposite[j] < absent[j]))
        .unwrap();
    Ok(format!(
        "ring/solid crossover at {:.2e} Hz, opposite center lowest from {:.2e} Hz",
        f[cross], f[below]
    ))
}

fn capacitance() -> Outcome {
    let a: f64 = 5e-6;
    let mut lines = Vec::new();
    for ratio in [1.5, 2.0, 3.0] {
        let d = 2.0 * ratio * a;
        let exact = PI * EPS_0 / (d / (2.0 * a)).acosh();
        let mut errs = Vec::new();
        for nodes in [101, 201, 401] {
            let opts = ElectrostaticOptions {
                nodes,
                ..ElectrostaticOptions::default()
            };
            let start = Instant::now();
            let field = ok(solve_electrostatic(&ElectrostaticProblem::two_wire(a, d, 1.0), &opts))?;
            let c = ok(extract_capacitance(&field))?;
            let secs = start.elapsed().as_secs_f64();
            ensure(secs < 30.0, format!("D/2a={ratio}, {nodes} nodes took {secs:.1} s"))?;
            errs.push((c / exact - 1.0).abs());
        }
        ensure(
            errs.windows(2).all(|w| w[1] < w[0]),
            format!("D/2a={ratio}: error not monotone under refinement {errs:?}"),
        )?;
        ensure(*errs.last().unwrap() <= 0.05, format!("D/2a={ratio}: error {:.2}%", 100.0 * errs[2]))?;
        lines.push(format!("{ratio}: {:.3}%", 100.0 * errs[2]));
    }
    Ok(format!("finest errors {}", lines.join(", ")))
}

fn silicon() -> Material {
    Material::new("silicon", 0.0, 11.7, 148.0, 1.66e6).unwrap()
}

fn thermal() -> Outcome {
    // rod with both ends held at 300 K, heated in its middle slab
    let (nz, len, side) = (101, 1e-3, 60e-6);
    let fixed = BoundaryCondition::Fixed { temperature: 300.0 };
    let a = BoundaryCondition::Adiabatic;
    let k = 148.0;
    let grid = ok(VoxelGrid::uniform(
        [3, 3, nz],
        [side / 3.0, side / 3.0, len / nz as f64],
        silicon(),
        [a, a, a, a, fixed, fixed],
    ))?;
    let mid: Vec<usize> = (0..3).flat_map(|y| (0..3).map(move |x| (x, y))).map(|(x, y)| grid.index(x, y, nz / 2)).collect();
    let q = 0.05;
    let start = Instant::now();
    let s = ok(solve_steady(&grid, &PowerMap::constant(mid, q)))?;
    let rod_secs = start.elapsed().as_secs_f64();
    let exact = q * len / (4.0 * k * side * side);
    let rod_err = ((s.t_max - 300.0) / exact - 1.0).abs();
    ensure(rod_err <= 0.01, format!("rod rise off by {:.3}%", 100.0 * rod_err))?;
    ensure(s.energy_balance_error() <= 1e-6, format!("rod energy balance {:e}", s.energy_balance_error()))?;

    let run = demo_run();
    let c = read_columns(&run.dir.join("hotspot_summary.csv"));
    let names = &c["variant"];
    let t_max = numeric(&c, "t_max_k");
    let injected = numeric(&c, "injected_w");
    let boundary = numeric(&c, "boundary_w");
    let t = |n: &str| t_max[names.iter().position(|v| v == n).unwrap()];
    for (i, b) in injected.iter().zip(&boundary) {
        ensure(((i - b) / i).abs() <= 1e-6, format!("stack energy balance {i} vs {b}"))?;
    }
    ensure(t("rotated") < t("aligned"), "rotation does not lower the peak")?;
    ensure(t("thermal_vias") < t("aligned"), "thermal vias do not lower the peak")?;
    let stage = run.manifest.stages.iter().find(|s| s.stage == "hotspot").unwrap();
    ensure(stage.seconds < 60.0 && rod_secs < 60.0, "thermal solve too slow")?;
    ensure(grid.len() <= 500_000, "rod grid above budget")?;
    Ok(format!(
        "rod {:.4}% off, T_max aligned {:.2} K, rotated {:.2} K, thermal vias {:.2} K",
        100.0 * rod_err,
        t("aligned"),
        t("rotated"),
        t("thermal_vias")
    ))
}

/// Silicon block with a bond layer and two heated patches on top.
fn block(nx: usize, ny: usize, nz: usize) -> (VoxelGrid, Vec<Port>) {
    let pitch = 25e-6;
    let mut grid = VoxelGrid::uniform(
        [nx, ny, nz],
        [pitch, pitch, pitch],
        silicon(),
        viaflow::thermal::default_boundaries(),
    )
    .unwrap();
    grid.palette.push(Material::new("oxide", 0.0, 3.9, 1.4, 1.6e6).unwrap());
    let bond = nz / 2;
    for y in 0..ny {
        for x in 0..nx {
            let i = grid.index(x, y, bond);
            grid.material[i] = 1;
        }
    }
    let patch = |x0: usize, y0: usize| -> Vec<usize> {
        (y0..y0 + ny / 6)
            .flat_map(|y| (x0..x0 + nx / 6).map(move |x| (x, y)))
            .map(|(x, y)| grid.index(x, y, nz - 1))
            .collect()
    };
    let ports = vec![
        Port {
            name: "p0".into(),
            voxels: patch(nx / 6, ny / 6),
        },
        Port {
            name: "p1".into(),
            voxels: patch(nx / 2, ny / 2),
        },
    ];
    (grid, ports)
}

fn mor() -> Outcome {
    let start = Instant::now();
    let (grid, ports) = block(40, 40, 8);
    let net = ok(extract_thermal_network(&grid, &ports))?;
    let full = StateSpaceRC::from_network(&net);
    let red = ok(reduce_arnoldi(&full, 20))?;
    let (t_end, steps) = (20e-3, 200);
    let amps = [0.3, 0.2];
    let power = PowerMap {
        sources: ports
            .iter()
            .zip(amps)
            .map(|(p, a)| PowerSource {
                voxels: p.voxels.clone(),
                waveform: Waveform::Step { delay: 0.0, value: a },
            })
            .collect(),
    };
    let dt = t_end / steps as f64;
    let oracle = ok(solve_transient(&grid, &power, &ports, &TransientOptions { dt, t_end, initial: None }))?;
    let y = ok(red.simulate(&|_| amps.to_vec(), dt, steps))?;
    let mut peak: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for p in 0..2 {
        for s in 1..=steps {
            let rise = oracle.port_temperatures[p][s] - 300.0;
            let rom = y[s - 1][p] + red.output_offset[p] - 300.0;
            peak = peak.max(rise.abs());
            worst = worst.max((rise - rom).abs());
        }
    }
    let step_err = worst / peak;
    let gf = ok(dc_gain(&full))?;
    let gr = ok(dc_gain(&red))?;
    let dc_err = (&gf - &gr).amax() / gf.amax();
    let secs = start.elapsed().as_secs_f64();
    ensure(net.len() >= 10_000, format!("{} nodes", net.len()))?;
    ensure(red.order() == 20 && red.inputs() == 2, "wrong reduced shape")?;
    ensure(step_err <= 0.01, format!("step response error {:.3}%", 100.0 * step_err))?;
    ensure(dc_err <= 1e-10, format!("DC gain error {dc_err:e}"))?;
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{} nodes, q=20, step error {:.1e}, DC error {dc_err:.1e}, {secs:.1} s",
        net.len(),
        step_err
    ))
}

fn circuit() -> Outcome {
    let ctx = NetlistContext::default();
    let div = ok(parse_netlist("V1 a 0 1\nR1 a b 1k\nR2 b 0 3k\n", &ctx))?;
    let vb = ok(dc_solve(&div))?.voltage("b").unwrap();
    ensure((vb - 0.75).abs() <= 1e-12, format!("divider gives {vb}"))?;

    let (r, c) = (1e3, 1e-6);
    let rc = ok(parse_netlist("V1 in 0 ac 1\nR1 in out 1k\nC1 out 0 1u\n", &ctx))?;
    let gain = |f: f64| -> Result<f64, String> {
        let a = ok(ac_sweep(&rc, &[f]))?;
        Ok(a.voltage("out").unwrap()[0].norm())
    };
    let (mut lo, mut hi): (f64, f64) = (1.0, 1e5);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if gain(mid)? > 0.5f64.sqrt() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fc = 1.0 / (2.0 * PI * r * c);
    let f3 = (lo * hi).sqrt();
    ensure((f3 / fc - 1.0).abs() <= 1e-3, format!("-3 dB at {f3} Hz, expected {fc}"))?;

    let text = "V1 a 0 5\nI1 0 c 2m\nR1 a b 1k\nR2 b 0 2k\nR3 b c 500\nR4 c 0 3k\nR5 a c 4k\n";
    let net = ok(parse_netlist(text, &ctx))?;
    let dc = ok(dc_solve(&net))?;
    let v = |n: &str| if n == "0" { 0.0 } else { dc.voltage(n).unwrap() };
    let mut leaving: BTreeMap<&str, f64> = BTreeMap::new();
    for (n1, n2, ohms) in [
        ("a", "b", 1e3),
        ("b", "0", 2e3),
        ("b", "c", 500.0),
        ("c", "0", 3e3),
        ("a", "c", 4e3),
    ] {
        let i = (v(n1) - v(n2)) / ohms;
        *leaving.entry(n1).or_default() += i;
        *leaving.entry(n2).or_default() -= i;
    }
    *leaving.entry("a").or_default() += dc.currents["V1"];
    *leaving.entry("0").or_default() -= dc.currents["V1"];
    *leaving.entry("0").or_default() += 2e-3;
    *leaving.entry("c").or_default() -= 2e-3;
    let kcl = ["a", "b", "c"].iter().map(|n| leaving[n].abs()).fold(0.0, f64::max);
    ensure(kcl <= 1e-9, format!("KCL residual {kcl:e}"))?;
    ensure(dc.kcl_residual <= 1e-9, format!("reported KCL residual {:e}", dc.kcl_residual))?;
    Ok(format!(
        "divider error {:.1e}, -3 dB {:.4}% off, KCL {kcl:.1e} A",
        (vb - 0.75).abs(),
        100.0 * (f3 / fc - 1.0).abs()
    ))
}

/// Terminated line-short-line cascade.
fn short_chain(f: f64) -> f64 {
    let (rpul, lpul, cpul, len) = (1e4, 4e-7, 2e-10, 5e-3);
    let (rs, rl) = (50.0, 1e6);
    let w = 2.0 * PI * f;
    let z = Complex64::new(rpul, w * lpul);
    let y = Complex64::new(0.0, w * cpul);
    let gamma = (z * y).sqrt();
    let z0 = (z / y).sqrt();
    let gl = gamma * (2.0 * len);
    let (a, b, c) = (gl.cosh(), z0 * gl.sinh(), gl.sinh() / z0);
    (rl / (a * rl + b + rs * (c * rl + a))).norm()
}

fn transfer() -> Outcome {
    let run = demo_run();
    let sub = read_columns(&run.dir.join("subdivision_impedance.csv"));
    let r = numeric(&sub, "r_single");
    ensure(r.iter().all(|&v| v >= r[0]), "table resistance dips below its DC value")?;
    let c = read_columns(&run.dir.join("transfer_transfer.csv"));
    let f = numeric(&c, "frequency_hz");
    let short = numeric(&c, "mag_short");
    let fixed = numeric(&c, "mag_fixed");
    let table = numeric(&c, "mag_table");
    for k in 0..f.len() {
        let want = short_chain(f[k]);
        ensure(
            (short[k] / want - 1.0).abs() <= 1e-9,
            format!("short chain {} vs cascade {want} at {:e} Hz", short[k], f[k]),
        )?;
        let slack = 1e-12 * short[k];
        ensure(
            short[k] + slack >= fixed[k] && fixed[k] + slack >= table[k],
            format!("ordering fails at {:e} Hz", f[k]),
        )?;
    }
    let cut = read_columns(&run.dir.join("transfer_cutoff.csv"));
    let cutoff = |m: &str| -> f64 {
        let i = cut["model"].iter().position(|v| v == m).unwrap();
        cut["cutoff_hz"][i].parse().unwrap_or(f64::INFINITY)
    };
    ensure(cutoff("short") > cutoff("fixed"), "short cutoff not above fixed")?;
    let last = f.len() - 1;
    let first = f.iter().position(|&v| v >= f[last] / 10.0).unwrap();
    let slope = |m: &[f64]| 20.0 * (m[last] / m[first]).log10();
    let (ss, sf, st) = (slope(&short), slope(&fixed), slope(&table));
    ensure(st < sf && st < ss, "table curve is not the steepest in the top decade")?;
    Ok(format!(
        "cutoff short {:.3e} Hz, fixed {:.3e} Hz; top-decade slopes {ss:.2}/{sf:.2}/{st:.2} dB",
        cutoff("short"),
        cutoff("fixed")
    ))
}

fn etherm() -> Outcome {
    let (grid, mut ports) = block(12, 12, 4);
    ports.truncate(1);
    let net_th = ok(extract_thermal_network(&grid, &ports))?;
    // rise per watt from the voxel solver
    let unit = ok(solve_steady(&grid, &PowerMap::constant(ports[0].voxels.clone(), 1.0)))?;
    let z = unit.port_temperature(&grid, &ports[0]) - 300.0;
    let (v, r0, t0) = (2.0, 10.0, 300.0);
    let fixed_point = |alpha: f64| {
        let g = |t: f64| t - 300.0 - z * v * v / (r0 * (1.0 + alpha * (t - t0)));
        let (mut lo, mut hi) = (300.0, 300.0 + 10.0 * z * v * v / r0 + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let ctx = NetlistContext::default();
    let mut detail = String::new();
    for alpha in [4e-3, 0.0] {
        let text = format!("V1 a 0 {v}\nRT1 a 0 tport=p0 r0={r0} t0={t0} alpha={alpha}\n");
        let net = ok(parse_netlist(&text, &ctx))?;
        let (dc, s) = ok(electro_thermal_solve(&net, &net_th, &EthermOptions::default()))?;
        let want = fixed_point(alpha);
        let err = (s.temperatures[0] - want).abs();
        ensure(s.converged && s.iterations <= 50, format!("alpha={alpha}: no convergence"))?;
        ensure(err <= 1e-3, format!("alpha={alpha}: {} K vs {want} K", s.temperatures[0]))?;
        let source = (v * dc.currents["V1"]).abs();
        let device: f64 = s.powers.iter().sum();
        let port: f64 = s.port_powers.iter().sum();
        let balance = ((source - device).abs()).max((device - port).abs()) / source;
        ensure(balance <= 1e-6, format!("power balance {balance:e}"))?;
        if alpha == 0.0 {
            ensure(
                s.history.len() == 2 && s.history[1] <= 1e-9,
                format!("alpha=0 took updates {:?}", s.history),
            )?;
        } else {
            detail = format!("alpha=4m: {} iterations, {:.1e} K off", s.iterations, err);
        }
    }
    Ok(format!("{detail}; alpha=0 settles in one update"))
}

fn round_trips() -> Outcome {
    // reduced model through SPICE text and the circuit solver
    let (grid, ports) = block(12, 12, 4);
    let net = ok(extract_thermal_network(&grid, &ports))?;
    let red = ok(reduce_arnoldi(&StateSpaceRC::from_network(&net), 6))?;
    let sub = ok(export_spice_subckt(SpiceObject::Reduced(&red), "rom"))?;
    let ctx = NetlistContext::default();
    let respond = |drive: [f64; 2]| -> Result<Vec<f64>, String> {
        let text = format!("{sub}\nI1 0 n0 {}\nI2 0 n1 {}\nX1 n0 n1 rom\n", drive[0], drive[1]);
        let dc = ok(dc_solve(&ok(parse_netlist(&text, &ctx))?))?;
        Ok(vec![dc.voltage("n0").unwrap(), dc.voltage("n1").unwrap()])
    };
    let base = respond([0.0, 0.0])?;
    let mut z = DMatrix::zeros(2, 2);
    for j in 0..2 {
        let mut d = [0.0; 2];
        d[j] = 1.0;
        let y = respond(d)?;
        for i in 0..2 {
            z[(i, j)] = y[i] - base[i];
        }
    }
    let g = ok(dc_gain(&red))?;
    let spice_err = (&z - &g).amax() / g.amax();
    ensure(spice_err <= 1e-9, format!("SPICE DC gain error {spice_err:e}"))?;
    ensure(
        base.iter().zip(&red.output_offset).all(|(b, o)| (b - o).abs() <= 1e-9 * o.abs()),
        "SPICE zero-input voltages differ from the model offset",
    )?;

    // configuration text
    let cfg = ok(parse_config(&workspace_configs().join("demo.toml")))?;
    let once = ok(to_toml(&cfg))?;
    let twice = ok(to_toml(&ok(parse_config_str(&once))?))?;
    ensure(once == twice, "parse-serialize-parse is not idempotent")?;

    // byte-identical reruns on one thread
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let stages: Vec<String> = ["hotspot", "heaters", "rc", "via_z"].iter().map(|s| s.to_string()).collect();
    let mut dirs = Vec::new();
    for k in 0..2 {
        let mut opts = RunOptions::new(tmp.path().join(format!("run{k}")));
        opts.threads = 1;
        opts.base_dir = workspace_configs();
        let m = ok(run_stages(&cfg, "det", &stages, &opts))?;
        dirs.push((tmp.path().join(format!("run{k}/det")), m));
    }
    let (a, ma) = &dirs[0];
    let (b, mb) = &dirs[1];
    ensure(ma.outputs == mb.outputs, "output lists differ")?;
    for name in &ma.outputs {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, format!("{name} differs between runs"))?;
    }
    let strip = |m: &RunManifest| {
        let mut m = m.clone();
        m.stages.iter_mut().for_each(|s| s.seconds = 0.0);
        m
    };
    ensure(strip(ma) == strip(mb), "manifests differ beyond timings")?;
    Ok(format!(
        "SPICE DC error {spice_err:.1e}, config idempotent, {} outputs byte-identical",
        ma.outputs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 round-wire skin effect", kelvin),
        ("2 via subdivision", subdivision),
        ("3 alternative cross-sections", shapes),
        ("4 two-wire capacitance", capacitance),
        ("5 stack thermal", thermal),
        ("6 model order reduction", mor),
        ("7 circuit analyses", circuit),
        ("8 line-via transfer function", transfer),
        ("9 electro-thermal loop", etherm),
        ("10 round trips and determinism", round_trips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {name}: {d} [{secs:.1} s]"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name}: {e} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
