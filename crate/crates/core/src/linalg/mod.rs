//! Dense kernels: real Schur form, Sylvester/Lyapunov solvers, the matrix
//! exponential and its Fréchet derivative.
//!
//! Everything works on `nalgebra::DMatrix<f64>`. Inputs are checked for finite
//! entries at the public boundary; internal helpers assume that has happened.

mod expm;
mod frechet;
mod schur;
mod sylvester;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use expm::{expm, expm_unscaled};
pub use frechet::{expm_frechet, expm_with_frechet};
pub use schur::{schur, SchurForm};
pub use sylvester::{solve_lyapunov, solve_lyapunov_schur, solve_sylvester, solve_sylvester_schur, SchurSide};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

/// Builds a matrix from row-major data, rejecting empty shapes and non-finite entries.
pub fn dense(rows: usize, cols: usize, row_major: &[f64]) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "matrix must be non-empty, got {rows}x{cols}"
        )));
    }
    if row_major.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            row_major.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, row_major);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub(crate) fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// `(M + Mᵀ) / 2`.
pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
