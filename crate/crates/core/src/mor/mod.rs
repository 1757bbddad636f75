//! Krylov reduction of symmetric RC systems and table fitting.

pub mod arnoldi;
pub mod fit;
pub mod system;
pub mod text;
pub mod validate;

pub use arnoldi::{reduce_arnoldi, DEFLATION_TOL};
pub use fit::{fit_table, FitKind, FitModel};
pub use system::{dc_gain, RcSystem, ReducedModel, StateSpaceRC};
pub use text::{read_reduced, write_reduced};
pub use validate::{response_error, validate_reduction, Stimulus, ValidationOptions, ValidationReport};
