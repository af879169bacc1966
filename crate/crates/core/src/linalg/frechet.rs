//! Fréchet derivative of the matrix exponential, `L(A, E) = ∫₀¹ e^{A(1-s)} E e^{As} ds`,
//! read off the block exponential `exp([[A, E], [0, A]]) = [[e^A, L(A,E)], [0, e^A]]`.

use super::expm::expm_unscaled;
use super::{ensure_finite, ensure_square, Matrix};
use crate::error::{Error, Result};

pub fn expm_frechet(a: &Matrix, e: &Matrix) -> Result<Matrix> {
    expm_with_frechet(a, e).map(|(_, l)| l)
}

/// Returns `(e^A, L(A, E))` from a single 2n×2n exponential.
pub fn expm_with_frechet(a: &Matrix, e: &Matrix) -> Result<(Matrix, Matrix)> {
    ensure_square(a, "Fréchet base point")?;
    if e.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Fréchet direction is {}x{}, base point is {}x{}",
            e.nrows(),
            e.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "Fréchet base point")?;
    ensure_finite(e, "Fréchet direction")?;

    let n = a.nrows();
    let mut big = Matrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(e);
    big.view_mut((n, n), (n, n)).copy_from(a);
    let exp = expm_unscaled(&big);
    Ok((
        exp.view((0, 0), (n, n)).into_owned(),
        exp.view((0, n), (n, n)).into_owned(),
    ))
}
