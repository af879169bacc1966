//! Bartels–Stewart solvers for `A X + X B + C = 0` and `A P + P Aᵀ + Q = 0`.
//!
//! Both coefficient matrices are reduced to real Schur form and the transformed
//! equation is solved block by block (1×1 and 2×2 diagonal blocks). A Schur form
//! can stand in for either the matrix or its transpose, so one factorization of
//! `A` serves equations in `A` and in `Aᵀ`.

use super::schur::{schur, SchurForm};
use super::{ensure_finite, ensure_square, symmetrize, Matrix};
use crate::error::{Error, Result};

/// Scale-relative threshold on `|λi(A) + λj(B)|` below which the pencil is singular.
const SINGULAR_GAP: f64 = 1e-12;

/// One coefficient of a Sylvester equation given through its Schur form:
/// `Q T Qᵀ` when `transposed` is false, `Q Tᵀ Qᵀ` when it is true.
#[derive(Debug, Clone, Copy)]
pub struct SchurSide<'a> {
    pub form: &'a SchurForm,
    pub transposed: bool,
}

impl<'a> SchurSide<'a> {
    pub fn plain(form: &'a SchurForm) -> Self {
        Self {
            form,
            transposed: false,
        }
    }

    pub fn transposed(form: &'a SchurForm) -> Self {
        Self { form, transposed: true }
    }

    fn dim(&self) -> usize {
        self.form.dim()
    }

    #[inline]
    fn t(&self, i: usize, j: usize) -> f64 {
        if self.transposed {
            self.form.t[(j, i)]
        } else {
            self.form.t[(i, j)]
        }
    }
}

/// Solves `A X + X B + C = 0`.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Sylvester coefficient A")?;
    ensure_square(b, "Sylvester coefficient B")?;
    ensure_finite(c, "Sylvester constant term")?;
    let fa = schur(a)?;
    let fb = schur(b)?;
    solve_sylvester_schur(SchurSide::plain(&fa), SchurSide::plain(&fb), c)
}

/// Solves `A P + P Aᵀ + Q = 0`. The result is symmetrized when `Q` is symmetric.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Lyapunov coefficient")?;
    let fa = schur(a)?;
    solve_lyapunov_schur(&fa, q)
}

/// [`solve_lyapunov`] with a precomputed Schur form of `A`.
pub fn solve_lyapunov_schur(a: &SchurForm, q: &Matrix) -> Result<Matrix> {
    ensure_finite(q, "Lyapunov constant term")?;
    let p = solve_sylvester_schur(SchurSide::plain(a), SchurSide::transposed(a), q)?;
    let asym = (q - q.transpose()).norm();
    if asym <= 1e-12 * q.norm() {
        Ok(symmetrize(&p))
    } else {
        Ok(p)
    }
}

/// Solves `A X + X B + C = 0` with `A`, `B` given through Schur forms.
pub fn solve_sylvester_schur(left: SchurSide<'_>, right: SchurSide<'_>, c: &Matrix) -> Result<Matrix> {
    let (p, q) = (left.dim(), right.dim());
    if c.nrows() != p || c.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "Sylvester constant term is {}x{}, coefficients need {p}x{q}",
            c.nrows(),
            c.ncols()
        )));
    }
    check_pencil(left.form, right.form)?;

    let ua = &left.form.q;
    let ub = &right.form.q;
    let f = ua.transpose() * c * ub;
    let mut y = Matrix::zeros(p, q);

    let mut row_blocks = left.form.blocks();
    if !left.transposed {
        row_blocks.reverse();
    }
    let mut col_blocks = right.form.blocks();
    if right.transposed {
        col_blocks.reverse();
    }

    let mut rhs = [0.0; 4];
    for &(j0, qj) in &col_blocks {
        for &(i0, pi) in &row_blocks {
            let (k_lo, k_hi) = if left.transposed { (0, i0) } else { (i0 + pi, p) };
            let (l_lo, l_hi) = if right.transposed { (j0 + qj, q) } else { (0, j0) };
            for b in 0..qj {
                for a in 0..pi {
                    let (i, j) = (i0 + a, j0 + b);
                    let mut acc = -f[(i, j)];
                    for k in k_lo..k_hi {
                        acc -= left.t(i, k) * y[(k, j)];
                    }
                    for l in l_lo..l_hi {
                        acc -= y[(i, l)] * right.t(l, j);
                    }
                    rhs[a + pi * b] = acc;
                }
            }
            let sol = solve_block(&left, i0, pi, &right, j0, qj, &rhs)?;
            for b in 0..qj {
                for a in 0..pi {
                    y[(i0 + a, j0 + b)] = sol[a + pi * b];
                }
            }
        }
    }

    Ok(ua * y * ub.transpose())
}

fn check_pencil(a: &SchurForm, b: &SchurForm) -> Result<()> {
    let la = a.eigenvalues();
    let lb = b.eigenvalues();
    let mut gap = f64::INFINITY;
    for x in &la {
        for y in &lb {
            gap = gap.min((x + y).norm());
        }
    }
    let tol = SINGULAR_GAP * (a.t.norm() + b.t.norm());
    if gap <= tol {
        return Err(Error::SingularPencil {
            equation: "A X + X B + C = 0".into(),
            gap,
        });
    }
    Ok(())
}

/// Solves `Ta Y + Y Tb = rhs` for one (≤2)×(≤2) block, `rhs` stored column-major.
fn solve_block(
    left: &SchurSide<'_>,
    i0: usize,
    pi: usize,
    right: &SchurSide<'_>,
    j0: usize,
    qj: usize,
    rhs: &[f64; 4],
) -> Result<[f64; 4]> {
    let dim = pi * qj;
    if dim == 1 {
        let d = left.t(i0, i0) + right.t(j0, j0);
        if d == 0.0 {
            return Err(Error::SingularPencil {
                equation: "A X + X B + C = 0".into(),
                gap: 0.0,
            });
        }
        return Ok([rhs[0] / d, 0.0, 0.0, 0.0]);
    }

    // Kronecker form: (I ⊗ Ta + Tbᵀ ⊗ I) vec(Y) = vec(rhs).
    let mut m = [[0.0; 5]; 4];
    for b in 0..qj {
        for a in 0..pi {
            let row = a + pi * b;
            for b2 in 0..qj {
                for a2 in 0..pi {
                    let col = a2 + pi * b2;
                    let mut v = 0.0;
                    if b == b2 {
                        v += left.t(i0 + a, i0 + a2);
                    }
                    if a == a2 {
                        v += right.t(j0 + b2, j0 + b);
                    }
                    m[row][col] = v;
                }
            }
            m[row][4] = rhs[row];
        }
    }

    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        if m[piv][col] == 0.0 {
            return Err(Error::SingularPencil {
                equation: "A X + X B + C = 0".into(),
                gap: 0.0,
            });
        }
        m.swap(col, piv);
        for row in (col + 1)..dim {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                let pivot = m[col];
                for k in (col..dim).chain([4]) {
                    m[row][k] -= factor * pivot[k];
                }
            }
        }
    }
    let mut out = [0.0; 4];
    for row in (0..dim).rev() {
        let mut acc = m[row][4];
        for k in (row + 1)..dim {
            acc -= m[row][k] * out[k];
        }
        out[row] = acc / m[row][row];
    }
    Ok(out)
}
