//! Circuit simulation: MNA analyses, line transfer functions and the
//! electro-thermal relaxation loop.

pub mod etherm;
pub mod mna;
pub mod netlist;
pub mod transfer;

pub use etherm::{electro_thermal_solve, EthermOptions, EthermState};
pub use mna::{
    ac_sweep, dc_solve, dc_solve_at, line_abcd, transient_solve, AcResult, DcResult, Initial, TransientOptions,
    TransientResult,
};
pub use netlist::{
    load_netlist, parse_netlist, read_table_csv, Element, ElementKind, FreqTable, LineParams, Netlist,
    NetlistContext, Source, TimeWave, GROUND,
};
pub use transfer::{transfer_function, TransferChain, TransferResult, ViaElement};
