//! Sparse and dense linear algebra used by the field solvers and the reducer.

pub mod envelope;
pub mod pcg;
pub mod sparse;

pub use envelope::{factor_shifted, rcm_ordering, EnvelopeLdl};
pub use pcg::{pcg, PcgOptions, PcgStats, Preconditioner};
pub use sparse::{CsrMatrix, TripletBuilder};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense LU solve with partial pivoting; errors on a singular matrix.
pub fn dense_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Solver("singular matrix".into()))
}

pub fn dense_solve_complex(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let lu = a.clone().lu();
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| Error::Solver("singular matrix".into()))
}
