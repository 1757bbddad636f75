//! Voxel heat conduction for die stacks: steady and transient solves, hotspot
//! reporting and extraction of the equivalent RC network.

pub mod export;
pub mod grid;
pub mod network;
pub mod solve;

pub use crate::model::stack::insert_thermal_vias;
pub use export::{slice_svg, temperature_csv};
pub use grid::{
    default_boundaries, site_ports, site_power_map, voxelize, BoundaryCondition, Boundaries,
    LayerSlices, Port, PowerMap, PowerSource, VoxelGrid, VoxelOptions, Waveform,
};
pub use network::{extract_thermal_network, ThermalModel, ThermalNetwork};
pub use solve::{assemble, solve_steady, solve_transient, ThermalSolution, TransientOptions, TransientResult};
