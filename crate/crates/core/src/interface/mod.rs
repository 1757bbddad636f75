//! Configuration, scenario runner, SPICE export and SVG plots.

pub mod config;
pub mod plot;
pub mod run;
pub mod spice;

pub use config::{parse_config, parse_config_str, to_toml, ProjectConfig, Quantity, StageSpec};
pub use plot::{emit_cell_map, emit_plot, CsvTable, PlotStyle};
pub use run::{run_scenario, run_stages, RunManifest, RunOptions};
pub use spice::{export_spice_subckt, subckt_dc_response, Drive, SpiceObject};
