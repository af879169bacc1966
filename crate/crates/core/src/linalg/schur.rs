//! Real Schur decomposition `A = Q T Qᵀ`.
//!
//! Householder reduction to Hessenberg form followed by the implicit
//! double-shift (Francis) QR iteration with Wilkinson and ad hoc exceptional
//! shifts, after the classic EISPACK `orthes`/`hqr2` pair. Real eigenvalue pairs
//! that converge together are split with a rotation, so every 2×2 diagonal block
//! of `T` carries a complex-conjugate pair.

use nalgebra::Complex;

use super::{ensure_finite, ensure_square, Matrix};
use crate::error::{Error, Result};

/// Iterations allowed per eigenvalue before giving up.
const MAX_ITER_PER_EIGENVALUE: usize = 60;

#[derive(Debug, Clone)]
pub struct SchurForm {
    /// Orthogonal Schur vectors.
    pub q: Matrix,
    /// Upper quasi-triangular factor.
    pub t: Matrix,
}

impl SchurForm {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Diagonal blocks of `T` as `(start, size)` with `size ∈ {1, 2}`.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        blocks
    }

    /// Eigenvalues read off the diagonal blocks, in block order.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let t = &self.t;
        let mut out = Vec::with_capacity(self.dim());
        for (i, size) in self.blocks() {
            if size == 1 {
                out.push(Complex::new(t[(i, i)], 0.0));
            } else {
                let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
                let mid = 0.5 * (a + d);
                let p = 0.5 * (a - d);
                let disc = p * p + b * c;
                if disc < 0.0 {
                    let im = (-disc).sqrt();
                    out.push(Complex::new(mid, im));
                    out.push(Complex::new(mid, -im));
                } else {
                    let s = disc.sqrt();
                    out.push(Complex::new(mid + s, 0.0));
                    out.push(Complex::new(mid - s, 0.0));
                }
            }
        }
        out
    }

    /// `Q T Qᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        &self.q * &self.t * self.q.transpose()
    }
}

/// Real Schur factorization of a square matrix.
pub fn schur(a: &Matrix) -> Result<SchurForm> {
    ensure_square(a, "Schur input")?;
    ensure_finite(a, "Schur input")?;
    let n = a.nrows();
    let mut h = a.clone();
    let mut v = Matrix::identity(n, n);
    if n > 2 {
        hessenberg(&mut h, &mut v);
    }
    francis_qr(&mut h, &mut v)?;
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
    Ok(SchurForm { q: v, t: h })
}

/// Householder reduction to upper Hessenberg form, accumulating the
/// transformations in `v` (initially the identity).
fn hessenberg(h: &mut Matrix, v: &mut Matrix) {
    let n = h.nrows();
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    for m in (1..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in (m + 1)..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[(i, j)];
            }
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i];
            }
        }
    }

    // The Householder vectors were parked below the subdiagonal.
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
}

/// Reduces an upper Hessenberg `h` to real Schur form in place, applying every
/// rotation/reflection to the columns of `v` as well.
fn francis_qr(h: &mut Matrix, v: &mut Matrix) -> Result<()> {
    let nn = h.nrows();
    if nn == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;

    while n >= 0 {
        let nu = n as usize;

        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)] == 0.0 || h[(l, l - 1)].abs() < eps * s {
                h[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            h[(nu, nu)] += exshift;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;

            if q >= 0.0 {
                // Real pair: rotate the block to upper triangular.
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in 0..nn {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
                h[(nu, nu - 1)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form the shift.
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];

            if iter == 10 {
                // Wilkinson's ad hoc shift.
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                return Err(Error::NonConvergence {
                    what: "real Schur QR iteration",
                    iterations: total_iter,
                });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[(m, m - 1)].abs() * (q.abs() + r.abs());
                let rhs = eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in 0..nn {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(())
}
