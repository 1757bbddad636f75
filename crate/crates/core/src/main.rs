use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use viaflow::interface::config::parse_config;
use viaflow::interface::{run_scenario, run_stages, RunManifest, RunOptions};
use viaflow::{Error, Result};

#[derive(Parser)]
#[command(name = "viaflow", version, about = "Multi-physics analysis of 3D-stacked interconnects")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Project configuration (TOML).
    #[arg(long, global = true, default_value = "viaflow.toml")]
    config: PathBuf,
    /// Root directory for run outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Reserved; recorded in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency-dependent via impedance.
    ExtractZ(Stages),
    /// Two-conductor capacitance.
    ExtractC(Stages),
    /// Coupling RLCG sweep over via distance.
    CouplingSweep(Stages),
    /// Steady stack temperatures.
    Thermal(Stages),
    /// Thermal network extraction and model order reduction.
    Reduce(Stages),
    /// AC sweep of a netlist.
    Ac(Stages),
    /// Transfer function of the line-via-line chain.
    Tf(Stages),
    /// Electro-thermal fixed point.
    Etherm(Stages),
    /// Every stage of a scenario.
    Run { scenario: String },
}

#[derive(Args)]
struct Stages {
    /// Stage names; all stages of this kind if omitted.
    stages: Vec<String>,
}

fn execute(cli: Cli) -> Result<RunManifest> {
    let cfg = parse_config(&cli.common.config)?;
    let base_dir = cli
        .common
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let opts = RunOptions {
        out_dir: cli.common.out_dir,
        threads: cli.common.threads,
        seed: cli.common.seed,
        base_dir,
    };
    let (verb, stages) = match cli.command {
        Command::Run { scenario } => return run_scenario(&cfg, &scenario, &opts),
        Command::ExtractZ(s) => ("extract-z", s),
        Command::ExtractC(s) => ("extract-c", s),
        Command::CouplingSweep(s) => ("coupling-sweep", s),
        Command::Thermal(s) => ("thermal", s),
        Command::Reduce(s) => ("reduce", s),
        Command::Ac(s) => ("ac", s),
        Command::Tf(s) => ("tf", s),
        Command::Etherm(s) => ("etherm", s),
    };
    let names = if stages.stages.is_empty() {
        cfg.stages.iter().filter(|(_, s)| s.verb() == verb).map(|(n, _)| n.clone()).collect()
    } else {
        for n in &stages.stages {
            match cfg.stages.get(n) {
                Some(s) if s.verb() == verb => {}
                Some(s) => return Err(Error::config(format!("stage `{n}` is a {} stage", s.verb()))),
                None => return Err(Error::config(format!("undefined stage `{n}`"))),
            }
        }
        stages.stages
    };
    if names.is_empty() {
        return Err(Error::config(format!("no {verb} stages in the configuration")));
    }
    run_stages(&cfg, verb, &names, &opts)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(m) => {
            for s in &m.stages {
                println!("{:<16} {:<15} {:.3} s", s.stage, s.kind, s.seconds);
            }
            for o in &m.outputs {
                println!("wrote {o}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
