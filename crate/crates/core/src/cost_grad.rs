//! Error-system assembly, the H2,τ cost and its closed-form gradients.
//!
//! For a full model `(A, B, C)` and reduced model `(A_r, B_r, C_r)` the error
//! system has the block realization `(diag(A, A_r), [B; B_r], [C, −C_r])`. Its
//! time-limited Gramians split into the blocks
//!
//! ```text
//! P_e = [P_τ  X_τ; X_τᵀ P_r,τ]      Q_e = [Q_τ  Y_τ; Y_τᵀ Q_r,τ]
//! ```
//!
//! each of which solves its own Lyapunov or Sylvester equation. The gradient of
//! `J = ‖G − G_r‖²_{H2,τ}` additionally needs the infinite-horizon `P_r` and `X`
//! and the Fréchet derivative of `e^{A_r τ}`:
//!
//! ```text
//! ∇_{A_r} J = 2 (Q_r,τ P_r + Y_τᵀ X + τ L(A_r τ, S_τ)ᵀ)
//! ∇_{B_r} J = 2 (Q_r,τ B_r + Y_τᵀ B)
//! ∇_{C_r} J = 2 (C_r P_r,τ − C X_τ)
//! S_τ       = Xᵀ e^{Aᵀτ} Cᵀ C_r − P_r e^{A_rᵀτ} C_rᵀ C_r
//! ```
//!
//! `P_r` and `X` are plain linear solves; they exist whenever the eigenvalue-sum
//! conditions hold, stable or not.

use crate::error::{Error, Result};
use crate::gramians::{tl_constant, TimeLimitedGramianPair};
use crate::linalg::{
    expm, expm_frechet, max_abs, schur, solve_lyapunov_schur, solve_sylvester_schur, symmetrize, Matrix, SchurForm,
    SchurSide,
};
use crate::model::{Horizon, ReducedModel, StateSpaceModel};

/// Realization of `G − G_r`.
pub fn build_error_system(full: &StateSpaceModel, red: &ReducedModel) -> Result<StateSpaceModel> {
    full.ensure_io_compatible(red)?;
    let (n, r) = (full.order(), red.order());
    let mut a = Matrix::zeros(n + r, n + r);
    a.view_mut((0, 0), (n, n)).copy_from(full.a());
    a.view_mut((n, n), (r, r)).copy_from(red.a());
    let mut b = Matrix::zeros(n + r, full.inputs());
    b.view_mut((0, 0), (n, full.inputs())).copy_from(full.b());
    b.view_mut((n, 0), (r, full.inputs())).copy_from(red.b());
    let mut c = Matrix::zeros(full.outputs(), n + r);
    c.view_mut((0, 0), (full.outputs(), n)).copy_from(full.c());
    c.view_mut((0, n), (full.outputs(), r)).copy_from(&(-red.c()));
    StateSpaceModel::new(a, b, c)
}

/// Everything about the full model that the reduction loop reuses: the Schur
/// form of `A`, `e^{Aτ}`, the Gramians and their traces.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    model: StateSpaceModel,
    horizon: Horizon,
    schur_a: SchurForm,
    gramians: TimeLimitedGramianPair,
    /// `e^{Aτ} B`.
    exp_b: Matrix,
    /// `C e^{Aτ}`.
    c_exp: Matrix,
    norm_sq_ctrl: f64,
    norm_sq_obs: f64,
}

/// The time-limited blocks of the error Gramians, enough for the cost.
#[derive(Debug, Clone)]
pub struct TimeLimitedBlocks {
    pub x_tau: Matrix,
    pub p_r_tau: Matrix,
    pub y_tau: Matrix,
    pub q_r_tau: Matrix,
    pub exp_ar_tau: Matrix,
}

/// All solves needed for the cost and the gradient at one reduced model.
#[derive(Debug, Clone)]
pub struct ErrorSystemWorkspace {
    pub tau: f64,
    /// `Tr(C P_τ Cᵀ)` of the full model.
    pub full_norm_sq_ctrl: f64,
    /// `Tr(Bᵀ Q_τ B)` of the full model.
    pub full_norm_sq_obs: f64,
    pub x_tau: Matrix,
    pub p_r_tau: Matrix,
    pub y_tau: Matrix,
    pub q_r_tau: Matrix,
    pub p_r: Matrix,
    pub x: Matrix,
    pub s_tau: Matrix,
    pub exp_a_tau: Matrix,
    pub exp_ar_tau: Matrix,
}

#[derive(Debug, Clone)]
pub struct CostGradient {
    pub j: f64,
    /// `J` from the observability-side trace form; its gap to `j` measures
    /// round-off.
    pub j_observability: f64,
    pub grad_ar: Matrix,
    pub grad_br: Matrix,
    pub grad_cr: Matrix,
}

impl CostGradient {
    /// Largest absolute gradient entry.
    pub fn norm_inf(&self) -> f64 {
        max_abs(&self.grad_ar)
            .max(max_abs(&self.grad_br))
            .max(max_abs(&self.grad_cr))
    }

    pub fn norm_frobenius(&self) -> f64 {
        (self.grad_ar.norm_squared() + self.grad_br.norm_squared() + self.grad_cr.norm_squared()).sqrt()
    }
}

impl PreparedModel {
    pub fn new(full: &StateSpaceModel, horizon: Horizon) -> Result<Self> {
        let schur_a = schur(full.a())?;
        let exp_a_tau = expm(full.a(), horizon.tau())?;
        let gramians = TimeLimitedGramianPair::with_factors(full, &schur_a, exp_a_tau)?;
        let exp_b = &gramians.exp_a_tau * full.b();
        let c_exp = full.c() * &gramians.exp_a_tau;
        let norm_sq_ctrl = gramians.norm_squared_controllability(full);
        let norm_sq_obs = gramians.norm_squared_observability(full);
        Ok(Self {
            model: full.clone(),
            horizon,
            schur_a,
            gramians,
            exp_b,
            c_exp,
            norm_sq_ctrl,
            norm_sq_obs,
        })
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn gramians(&self) -> &TimeLimitedGramianPair {
        &self.gramians
    }

    /// `‖G‖²_{H2,τ}` of the full model.
    pub fn norm_squared(&self) -> f64 {
        self.norm_sq_ctrl
    }

    /// Solves for `X_τ`, `P_r,τ`, `Y_τ`, `Q_r,τ`.
    pub fn time_limited(&self, red: &ReducedModel) -> Result<TimeLimitedBlocks> {
        let (blocks, _) = self.time_limited_with_schur(red)?;
        Ok(blocks)
    }

    fn time_limited_with_schur(&self, red: &ReducedModel) -> Result<(TimeLimitedBlocks, SchurForm)> {
        self.model.ensure_io_compatible(red)?;
        let full = &self.model;
        let schur_r = schur(red.a())?;
        let exp_ar_tau = expm(red.a(), self.horizon.tau())?;
        let exp_br = &exp_ar_tau * red.b();
        let cr_exp = red.c() * &exp_ar_tau;

        let x_rhs = full.b() * red.b().transpose() - &self.exp_b * exp_br.transpose();
        let x_tau = solve_sylvester_schur(SchurSide::plain(&self.schur_a), SchurSide::transposed(&schur_r), &x_rhs)
            .map_err(|e| e.in_equation("X_tau"))?;

        let brbr = red.b() * red.b().transpose();
        let p_r_tau =
            solve_lyapunov_schur(&schur_r, &tl_constant(&brbr, &exp_ar_tau)).map_err(|e| e.in_equation("P_r_tau"))?;

        let y_rhs = self.c_exp.transpose() * &cr_exp - full.c().transpose() * red.c();
        let y_tau = solve_sylvester_schur(SchurSide::transposed(&self.schur_a), SchurSide::plain(&schur_r), &y_rhs)
            .map_err(|e| e.in_equation("Y_tau"))?;

        let crcr = red.c().transpose() * red.c();
        let q_rhs = tl_constant(&crcr, &exp_ar_tau.transpose());
        let q_r_tau = solve_sylvester_schur(SchurSide::transposed(&schur_r), SchurSide::plain(&schur_r), &q_rhs)
            .map_err(|e| e.in_equation("Q_r_tau"))?;

        Ok((
            TimeLimitedBlocks {
                x_tau,
                p_r_tau,
                y_tau,
                q_r_tau: symmetrize(&q_r_tau),
                exp_ar_tau,
            },
            schur_r,
        ))
    }

    /// Full workspace: the time-limited blocks plus `P_r`, `X` and `S_τ`.
    pub fn workspace(&self, red: &ReducedModel) -> Result<ErrorSystemWorkspace> {
        let (blocks, schur_r) = self.time_limited_with_schur(red)?;
        let full = &self.model;

        let p_r = solve_lyapunov_schur(&schur_r, &(red.b() * red.b().transpose())).map_err(|e| e.in_equation("P_r"))?;
        let x = solve_sylvester_schur(
            SchurSide::plain(&self.schur_a),
            SchurSide::transposed(&schur_r),
            &(full.b() * red.b().transpose()),
        )
        .map_err(|e| e.in_equation("X"))?;
        let cr_exp = red.c() * &blocks.exp_ar_tau;
        let s_tau = (&self.c_exp * &x).transpose() * red.c() - &p_r * cr_exp.transpose() * red.c();

        Ok(ErrorSystemWorkspace {
            tau: self.horizon.tau(),
            full_norm_sq_ctrl: self.norm_sq_ctrl,
            full_norm_sq_obs: self.norm_sq_obs,
            x_tau: blocks.x_tau,
            p_r_tau: blocks.p_r_tau,
            y_tau: blocks.y_tau,
            q_r_tau: blocks.q_r_tau,
            p_r,
            x,
            s_tau,
            exp_a_tau: self.gramians.exp_a_tau.clone(),
            exp_ar_tau: blocks.exp_ar_tau,
        })
    }

    /// `J` from the controllability-side trace form.
    pub fn cost_from_blocks(&self, red: &ReducedModel, blocks: &TimeLimitedBlocks) -> f64 {
        cost_ctrl_form(self.norm_sq_ctrl, self.model.c(), red, &blocks.x_tau, &blocks.p_r_tau)
    }

    /// Cost and all three gradients.
    pub fn evaluate(&self, red: &ReducedModel) -> Result<CostGradient> {
        let ws = self.workspace(red)?;
        gradients(&self.model, red, &ws)
    }
}

/// Builds the workspace for one `(full, red, τ)` triple.
pub fn assemble_workspace(full: &StateSpaceModel, red: &ReducedModel, h: Horizon) -> Result<ErrorSystemWorkspace> {
    PreparedModel::new(full, h)?.workspace(red)
}

fn cost_ctrl_form(norm_sq: f64, c: &Matrix, red: &ReducedModel, x_tau: &Matrix, p_r_tau: &Matrix) -> f64 {
    let cross = (c * x_tau).component_mul(red.c()).sum();
    let reduced = (red.c() * p_r_tau).component_mul(red.c()).sum();
    norm_sq - 2.0 * cross + reduced
}

/// `J = Tr(C P_τ Cᵀ − 2 C X_τ C_rᵀ + C_r P_r,τ C_rᵀ)`.
pub fn cost(full: &StateSpaceModel, red: &ReducedModel, ws: &ErrorSystemWorkspace) -> f64 {
    cost_ctrl_form(ws.full_norm_sq_ctrl, full.c(), red, &ws.x_tau, &ws.p_r_tau)
}

/// `J = Tr(Bᵀ Q_τ B + 2 Bᵀ Y_τ B_r + B_rᵀ Q_r,τ B_r)`.
pub fn cost_observability_form(full: &StateSpaceModel, red: &ReducedModel, ws: &ErrorSystemWorkspace) -> f64 {
    let cross = (&ws.y_tau * red.b()).component_mul(full.b()).sum();
    let reduced = (&ws.q_r_tau * red.b()).component_mul(red.b()).sum();
    ws.full_norm_sq_obs + 2.0 * cross + reduced
}

/// Closed-form gradients of `J` with respect to `A_r`, `B_r`, `C_r`.
pub fn gradients(full: &StateSpaceModel, red: &ReducedModel, ws: &ErrorSystemWorkspace) -> Result<CostGradient> {
    let r = red.order();
    if ws.p_r.shape() != (r, r) || ws.x.shape() != (full.order(), r) {
        return Err(Error::DimensionMismatch(
            "workspace does not belong to this model pair".into(),
        ));
    }
    let tau = ws.tau;
    let frechet = expm_frechet(&(red.a() * tau), &ws.s_tau)?;
    let grad_ar = (&ws.q_r_tau * &ws.p_r + ws.y_tau.transpose() * &ws.x + frechet.transpose() * tau) * 2.0;
    let grad_br = (&ws.q_r_tau * red.b() + ws.y_tau.transpose() * full.b()) * 2.0;
    let grad_cr = (red.c() * &ws.p_r_tau - full.c() * &ws.x_tau) * 2.0;
    Ok(CostGradient {
        j: cost(full, red, ws),
        j_observability: cost_observability_form(full, red, ws),
        grad_ar,
        grad_br,
        grad_cr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> StateSpaceModel {
        StateSpaceModel::new(
            Matrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.0, -0.2, -2.0, 0.3, 0.1, 0.0, -0.7]),
            Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, -1.0, 0.2, 0.3]),
            Matrix::from_row_slice(2, 3, &[0.3, 1.0, -0.4, 0.0, 0.6, 1.2]),
        )
        .unwrap()
    }

    #[test]
    fn error_system_of_scalars() {
        let one = |x: f64| Matrix::from_element(1, 1, x);
        let full = StateSpaceModel::new(one(-1.0), one(2.0), one(3.0)).unwrap();
        let red = StateSpaceModel::new(one(-5.0), one(0.5), one(4.0)).unwrap();
        let e = build_error_system(&full, &red).unwrap();
        assert_eq!(e.a(), &Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -5.0]));
        assert_eq!(e.b(), &Matrix::from_row_slice(2, 1, &[2.0, 0.5]));
        assert_eq!(e.c(), &Matrix::from_row_slice(1, 2, &[3.0, -4.0]));
    }

    #[test]
    fn exact_copy_has_zero_cost_and_gradient() {
        let full = model();
        let h = Horizon::new(0.9).unwrap();
        let ws = assemble_workspace(&full, &full, h).unwrap();
        let pair = TimeLimitedGramianPair::new(&full, h).unwrap();
        assert!((&ws.x_tau - &pair.p_tau).norm() < 1e-13);
        assert!((&ws.y_tau + &pair.q_tau).norm() < 1e-13);
        assert!(ws.s_tau.norm() < 1e-13);
        let g = gradients(&full, &full, &ws).unwrap();
        assert!(g.j.abs() < 1e-14);
        assert!(g.norm_frobenius() < 1e-9 * (1.0 + full.a().norm()));
        assert!(cost_observability_form(&full, &full, &ws).abs() < 1e-14);
    }

    #[test]
    fn zero_reduced_io_degenerates_to_full_norm() {
        let full = model();
        let h = Horizon::new(1.3).unwrap();
        let red = StateSpaceModel::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.5, -0.5, -1.0]),
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let ws = assemble_workspace(&full, &red, h).unwrap();
        for m in [&ws.x_tau, &ws.y_tau, &ws.p_r_tau, &ws.q_r_tau] {
            assert_eq!(m.norm(), 0.0);
        }
        let norm = crate::gramians::h2tau_norm_squared(&full, h).unwrap();
        assert!((cost(&full, &red, &ws) - norm).abs() < 1e-14 * norm);
    }

    #[test]
    fn output_gradient_by_substitution() {
        let full = model();
        let h = Horizon::new(1.0).unwrap();
        let red = StateSpaceModel::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::from_row_slice(2, 1, &[0.7, -0.2]),
        )
        .unwrap();
        let mut ws = assemble_workspace(&full, &red, h).unwrap();
        ws.p_r_tau = Matrix::identity(1, 1);
        ws.x_tau = Matrix::zeros(3, 1);
        let g = gradients(&full, &red, &ws).unwrap();
        assert!((g.grad_cr - red.c() * 2.0).norm() < 1e-15);
    }

    #[test]
    fn mismatched_io_rejected() {
        let full = model();
        let red = StateSpaceModel::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!(matches!(
            build_error_system(&full, &red),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(assemble_workspace(&full, &red, Horizon::new(1.0).unwrap()).is_err());
    }
}
