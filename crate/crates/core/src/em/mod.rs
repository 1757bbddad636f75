//! Electromagnetic extraction: filament impedance, round-wire oracle,
//! electrostatic capacitance and via-pair coupling tables.

pub mod coupling;
pub mod electrostatic;
pub mod filament;
pub mod lumped;
pub mod oracle;

pub use coupling::{coupling_sweep, CouplingOptions, CouplingRow, CouplingTable};
pub use electrostatic::{
    capacitance_matrix, extract_capacitance, extract_capacitance_with_contour, solve_electrostatic,
    ElectrostaticOptions, ElectrostaticProblem, PotentialField,
};
pub use filament::{
    default_frequency_grid, discretize_filaments, log_grid, solve_impedance, solve_impedance_direct,
    sweep_frequency, CurrentDensityMap, Filament, FilamentSolver, FilamentSystem, ImpedancePoint,
    ImpedanceTable, DEFAULT_REFERENCE_RADIUS,
};
pub use lumped::via_impedance;
pub use oracle::{round_wire_oracle, skin_depth};
