//! Parasitic extraction, thermal simulation, model order reduction and circuit
//! analysis for vertically stacked dies and their inter-chip vias.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circuit;
pub mod em;
pub mod error;
pub mod interface;
pub mod linalg;
pub mod model;
pub mod mor;
pub mod thermal;
pub mod units;

pub use error::{Error, Result};

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
