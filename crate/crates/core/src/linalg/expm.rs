//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3, 5, 7, 9 or 13, picked from the 1-norm of the argument.

use super::{ensure_finite, ensure_square, Matrix};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
#[allow(clippy::excessive_precision)]
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^{A t}` for `t ≥ 0`.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exponential time must be finite and non-negative, got {t}"
        )));
    }
    ensure_square(a, "exponential argument")?;
    ensure_finite(a, "exponential argument")?;
    Ok(expm_unscaled(&(a * t)))
}

/// `e^{A}`; the caller guarantees `a` is square and finite.
pub fn expm_unscaled(a: &Matrix) -> Matrix {
    let n = a.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s as u32)
    };

    let numer = &v + &u;
    let denom = v - u;
    // The Padé denominator is well conditioned for these norm bounds.
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Degree 3..9 approximants: `U = A Σ b_{2k+1} A^{2k}`, `V = Σ b_{2k} A^{2k}`.
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_inner = &ident * b[1];
    let mut v = &ident * b[0];
    for k in 1..(b.len() / 2) {
        power = &power * &a2;
        u_inner += &power * b[2 * k + 1];
        v += &power * b[2 * k];
    }
    (a * u_inner, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &B13;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = a * u_inner;

    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}
