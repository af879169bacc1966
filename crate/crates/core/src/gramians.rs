//! Time-limited Gramians, the H2,τ norm and the time-limited transfer function.
//!
//! The Gramians over `[0, τ]`
//!
//! ```text
//! P_τ = ∫₀^τ e^{At} B Bᵀ e^{Aᵀt} dt,   Q_τ = ∫₀^τ e^{Aᵀt} Cᵀ C e^{At} dt
//! ```
//!
//! are obtained from one dense Lyapunov solve each, with the constant term
//! corrected by the exponential at the end of the horizon:
//! `A P_τ + P_τ Aᵀ + BBᵀ − e^{Aτ} BBᵀ e^{Aᵀτ} = 0`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{expm, schur, solve_lyapunov_schur, Matrix, SchurForm};
use crate::model::{Horizon, StateSpaceModel};

pub type CMatrix = DMatrix<Complex<f64>>;

/// `P_τ`, `Q_τ` and the cached `e^{Aτ}` of one model.
#[derive(Debug, Clone)]
pub struct TimeLimitedGramianPair {
    pub p_tau: Matrix,
    pub q_tau: Matrix,
    pub exp_a_tau: Matrix,
}

impl TimeLimitedGramianPair {
    pub fn new(model: &StateSpaceModel, h: Horizon) -> Result<Self> {
        let form = schur(model.a())?;
        let exp_a_tau = expm(model.a(), h.tau())?;
        Self::with_factors(model, &form, exp_a_tau)
    }

    /// Builds the pair from a precomputed Schur form of `A` and `e^{Aτ}`.
    pub fn with_factors(model: &StateSpaceModel, form: &SchurForm, exp_a_tau: Matrix) -> Result<Self> {
        let p_tau = controllability_from_factors(model, form, &exp_a_tau)?;
        let q_tau = observability_from_factors(model, form, &exp_a_tau)?;
        Ok(Self {
            p_tau,
            q_tau,
            exp_a_tau,
        })
    }

    /// `Tr(C P_τ Cᵀ)`.
    pub fn norm_squared_controllability(&self, model: &StateSpaceModel) -> f64 {
        (model.c() * &self.p_tau * model.c().transpose()).trace()
    }

    /// `Tr(Bᵀ Q_τ B)`.
    pub fn norm_squared_observability(&self, model: &StateSpaceModel) -> f64 {
        (model.b().transpose() * &self.q_tau * model.b()).trace()
    }
}

/// `M − E M Eᵀ`, the time-limited correction of a Lyapunov constant term.
pub(crate) fn tl_constant(m: &Matrix, e: &Matrix) -> Matrix {
    m - e * m * e.transpose()
}

fn controllability_from_factors(model: &StateSpaceModel, form: &SchurForm, e: &Matrix) -> Result<Matrix> {
    let bbt = model.b() * model.b().transpose();
    solve_lyapunov_schur(form, &tl_constant(&bbt, e)).map_err(|err| err.in_equation("P_tau"))
}

fn observability_from_factors(model: &StateSpaceModel, form: &SchurForm, e: &Matrix) -> Result<Matrix> {
    // Aᵀ Q + Q A + CᵀC − e^{Aᵀτ} CᵀC e^{Aτ} = 0 is a Sylvester equation with
    // coefficients Aᵀ and A; reuse the Schur form of A on both sides.
    use crate::linalg::{solve_sylvester_schur, SchurSide};
    let ctc = model.c().transpose() * model.c();
    let constant = tl_constant(&ctc, &e.transpose());
    let q = solve_sylvester_schur(SchurSide::transposed(form), SchurSide::plain(form), &constant)
        .map_err(|err| err.in_equation("Q_tau"))?;
    Ok(crate::linalg::symmetrize(&q))
}

/// Time-limited controllability Gramian `P_τ`.
pub fn controllability_gramian_tl(model: &StateSpaceModel, h: Horizon) -> Result<Matrix> {
    let form = schur(model.a())?;
    let e = expm(model.a(), h.tau())?;
    controllability_from_factors(model, &form, &e)
}

/// Time-limited observability Gramian `Q_τ`.
pub fn observability_gramian_tl(model: &StateSpaceModel, h: Horizon) -> Result<Matrix> {
    let form = schur(model.a())?;
    let e = expm(model.a(), h.tau())?;
    observability_from_factors(model, &form, &e)
}

/// `‖G‖²_{H2,τ} = Tr(C P_τ Cᵀ)`.
pub fn h2tau_norm_squared(model: &StateSpaceModel, h: Horizon) -> Result<f64> {
    let p = controllability_gramian_tl(model, h)?;
    Ok((model.c() * p * model.c().transpose()).trace())
}

/// `H_τ(s) = C (sI − A)⁻¹ (I − e^{−sτ} e^{Aτ}) B`.
pub fn tl_transfer_function(model: &StateSpaceModel, h: Horizon, s: Complex<f64>) -> Result<CMatrix> {
    let e = expm(model.a(), h.tau())?;
    TimeLimitedResponse::new(model, h, &e).eval(s)
}

/// `d/ds H_τ(s) = −C (sI−A)⁻² (I − e^{−sτ}e^{Aτ}) B + τ e^{−sτ} C (sI−A)⁻¹ e^{Aτ} B`.
pub fn tl_transfer_function_derivative(model: &StateSpaceModel, h: Horizon, s: Complex<f64>) -> Result<CMatrix> {
    let e = expm(model.a(), h.tau())?;
    TimeLimitedResponse::new(model, h, &e).derivative(s)
}

/// Evaluator for `H_τ` and its derivative with `e^{Aτ}` computed once.
pub struct TimeLimitedResponse<'a> {
    model: &'a StateSpaceModel,
    tau: f64,
    exp_b: CMatrix,
}

impl<'a> TimeLimitedResponse<'a> {
    pub fn new(model: &'a StateSpaceModel, h: Horizon, exp_a_tau: &Matrix) -> Self {
        Self {
            model,
            tau: h.tau(),
            exp_b: to_complex(&(exp_a_tau * model.b())),
        }
    }

    pub fn eval(&self, s: Complex<f64>) -> Result<CMatrix> {
        let lu = resolvent(self.model.a(), s)?;
        let shifted = self.shifted_input(s);
        let z = lu.solve(&shifted).expect("resolvent checked nonsingular");
        Ok(to_complex(self.model.c()) * z)
    }

    pub fn derivative(&self, s: Complex<f64>) -> Result<CMatrix> {
        let lu = resolvent(self.model.a(), s)?;
        let shifted = self.shifted_input(s);
        let z = lu.solve(&shifted).expect("resolvent checked nonsingular");
        let z2 = lu.solve(&z).expect("resolvent checked nonsingular");
        let w = lu.solve(&self.exp_b).expect("resolvent checked nonsingular");
        let c = to_complex(self.model.c());
        let decay = (-s * self.tau).exp() * self.tau;
        Ok(&c * w * decay - c * z2)
    }

    /// `(I − e^{−sτ} e^{Aτ}) B`.
    fn shifted_input(&self, s: Complex<f64>) -> CMatrix {
        let decay = (-s * self.tau).exp();
        to_complex(self.model.b()) - &self.exp_b * decay
    }
}

pub(crate) fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// LU factors of `sI − A`, rejecting numerically singular shifts.
pub(crate) fn resolvent(
    a: &Matrix,
    s: Complex<f64>,
) -> Result<nalgebra::LU<Complex<f64>, nalgebra::Dyn, nalgebra::Dyn>> {
    let n = a.nrows();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { s } else { Complex::new(0.0, 0.0) };
        diag - Complex::new(a[(i, j)], 0.0)
    });
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(Error::SingularResolvent { re: s.re, im: s.im });
    }
    Ok(lu)
}
