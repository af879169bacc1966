//! Independent checks on a reduced model.
//!
//! * Interpolation identities: the closed-form gradients, projected onto the
//!   eigenvectors of `A_r`, equal tangential differences of the time-limited
//!   transfer functions at the mirrored poles `−λ̄_i`. The two sides share no
//!   code beyond the model data, so agreement cross-checks both.
//! * Spectral formulas for the Sylvester solutions applied to eigenvectors.
//! * The trace identity `Tr(CN) = Tr(DM)` for paired Sylvester equations.
//! * The time-domain bound `‖y − y_r‖_{L∞τ} ≤ ‖G − G_r‖_{H2,τ}` for unit-energy
//!   inputs, by simulation.
//!
//! Eigenvector conventions: `v_i` are unit columns of `V`, `ω_i` is row `i` of
//! `V⁻¹` (so `ω_i A_r = λ_i ω_i` and `ω_i v_j = δ_ij`), `w_i = ω_iᴴ`,
//! `b_i = ω_i B_r` and `c_i = C_r v_i`.

use nalgebra::{Complex, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cost_grad::{build_error_system, gradients, CostGradient, PreparedModel};
use crate::error::{Error, Result};
use crate::gramians::{resolvent, to_complex, CMatrix, TimeLimitedResponse};
use crate::linalg::{expm, expm_unscaled, schur, Matrix};
use crate::model::{Horizon, ReducedModel, StateSpaceModel};
use crate::parallel::Execution;

type C64 = Complex<f64>;

const REPEATED_POLE_TOL: f64 = 1e-6;
const EIGVEC_COND_LIMIT: f64 = 1e10;

fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub lambda: Vec<C64>,
    /// Right eigenvectors as unit columns.
    pub v: CMatrix,
    /// `V⁻¹`; row `i` is the left eigenvector `ω_i`.
    pub w: CMatrix,
    /// Row `i` is `b_i = ω_i B_r`.
    pub b: CMatrix,
    /// Column `i` is `c_i = C_r v_i`.
    pub c: CMatrix,
}

impl SpectralDecomposition {
    pub fn new(red: &ReducedModel) -> Result<Self> {
        let a = red.a();
        let r = a.nrows();
        let lambda = schur(a)?.eigenvalues();
        let scale = lambda.iter().map(|l| l.norm()).fold(1.0, f64::max);
        let mut separation = f64::INFINITY;
        for i in 0..r {
            for j in 0..i {
                separation = separation.min((lambda[i] - lambda[j]).norm() / scale);
            }
        }
        if separation < REPEATED_POLE_TOL {
            return Err(Error::RepeatedPoles { separation });
        }

        let ac = to_complex(a);
        let mut v = CMatrix::zeros(r, r);
        for (k, &l) in lambda.iter().enumerate() {
            let shifted = &ac - CMatrix::identity(r, r) * l;
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.expect("requested Vᴴ");
            let (idx, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("non-empty");
            let col = vt.row(idx).adjoint();
            let col = &col / C64::new(col.norm(), 0.0);
            v.set_column(k, &col);
        }
        let sv = v.singular_values();
        let condition = sv.max() / sv.min();
        if !(condition < EIGVEC_COND_LIMIT) {
            return Err(Error::NonDiagonalizable { condition });
        }
        let w = v.clone().try_inverse().ok_or(Error::NonDiagonalizable { condition })?;
        let b = &w * to_complex(red.b());
        let c = to_complex(red.c()) * &v;
        Ok(Self { lambda, v, w, b, c })
    }

    pub fn order(&self) -> usize {
        self.lambda.len()
    }

    /// `w_i = ω_iᴴ`.
    fn w_col(&self, i: usize) -> DVector<C64> {
        self.w.row(i).adjoint()
    }
}

/// One identity: normalized residual and the size of its left-hand side.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Residual {
    pub i: usize,
    pub j: usize,
    /// `‖LHS − RHS‖ / max(1, ‖LHS‖, ‖RHS‖)`.
    pub residual: f64,
    pub lhs_norm: f64,
}

fn residual<R1, C1, S1, R2, C2, S2>(
    i: usize,
    j: usize,
    lhs: &nalgebra::Matrix<C64, R1, C1, S1>,
    rhs: &nalgebra::Matrix<C64, R2, C2, S2>,
) -> Residual
where
    R1: nalgebra::Dim,
    C1: nalgebra::Dim,
    S1: nalgebra::RawStorage<C64, R1, C1>,
    R2: nalgebra::Dim,
    C2: nalgebra::Dim,
    S2: nalgebra::RawStorage<C64, R2, C2>,
{
    debug_assert_eq!(lhs.shape(), rhs.shape());
    let norm = |it: &mut dyn Iterator<Item = &C64>| it.map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (ln, rn) = (norm(&mut lhs.iter()), norm(&mut rhs.iter()));
    let diff = lhs
        .iter()
        .zip(rhs.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Residual {
        i,
        j,
        residual: diff / ln.max(rn).max(1.0),
        lhs_norm: ln,
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InterpolationResiduals {
    /// `½(∇_{B_r}J)ᵀ v_i = [H_rᴴ − Hᴴ](−λ̄_i) c_i`.
    pub right_tangential: Vec<Residual>,
    /// `½ ω_i (∇_{C_r}J)ᵀ = b_i [H_rᴴ − Hᴴ](−λ̄_i)`.
    pub left_tangential_transposed: Vec<Residual>,
    /// `½ (∇_{C_r}J) w_i = [H_r − H](−λ̄_i) b_iᴴ`.
    pub left_tangential: Vec<Residual>,
    /// `½ ω_i (∇_{A_r}J)ᵀ v_i = b_i [H'ᴴ − H_r'ᴴ](−λ̄_i) c_i`.
    pub bitangential: Vec<Residual>,
    /// `½ ω_i (∇_{A_r}J)ᵀ v_j = [b_i (∇_{B_r}J)ᵀ v_j − ω_i (∇_{C_r}J)ᵀ c_j] / (2(λ_j − λ_i))`.
    pub off_diagonal: Vec<Residual>,
    /// The same relation with denominator `2(λ_i − λ_j)`. Generally does not
    /// hold; reported for comparison.
    pub off_diagonal_swapped: Vec<Residual>,
}

impl InterpolationResiduals {
    fn identities(&self) -> impl Iterator<Item = &Residual> {
        self.right_tangential
            .iter()
            .chain(&self.left_tangential_transposed)
            .chain(&self.left_tangential)
            .chain(&self.bitangential)
            .chain(&self.off_diagonal)
    }

    /// Largest residual over the identities that hold for any reduced model.
    pub fn max_residual(&self) -> f64 {
        self.identities().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// Largest left-hand side, which vanishes at a stationary point.
    pub fn max_lhs(&self) -> f64 {
        self.identities().map(|r| r.lhs_norm).fold(0.0, f64::max)
    }

    /// Which orientation of the left-tangential identity holds to `tol`.
    pub fn left_orientation_holds(&self, tol: f64) -> (bool, bool) {
        let ok = |v: &[Residual]| v.iter().all(|r| r.residual < tol);
        (ok(&self.left_tangential_transposed), ok(&self.left_tangential))
    }
}

/// Evaluates every interpolation identity at `red`.
pub fn interpolation_residuals(
    full: &StateSpaceModel,
    red: &ReducedModel,
    h: Horizon,
) -> Result<InterpolationResiduals> {
    let prepared = PreparedModel::new(full, h)?;
    let ws = prepared.workspace(red)?;
    let grad = gradients(full, red, &ws)?;
    let spec = SpectralDecomposition::new(red)?;
    residuals_with(full, red, h, &ws.exp_a_tau, &ws.exp_ar_tau, &grad, &spec)
}

fn residuals_with(
    full: &StateSpaceModel,
    red: &ReducedModel,
    h: Horizon,
    exp_a: &Matrix,
    exp_ar: &Matrix,
    grad: &CostGradient,
    spec: &SpectralDecomposition,
) -> Result<InterpolationResiduals> {
    let g = TimeLimitedResponse::new(full, h, exp_a);
    let gr = TimeLimitedResponse::new(red, h, exp_ar);
    let half = c64(0.5);
    let ga = to_complex(&grad.grad_ar.transpose()) * half;
    let gb = to_complex(&grad.grad_br.transpose()) * half;
    let gc = to_complex(&grad.grad_cr.transpose()) * half;
    let gc_plain = to_complex(&grad.grad_cr) * half;

    let mut out = InterpolationResiduals::default();
    let r = spec.order();
    for i in 0..r {
        let s = -spec.lambda[i].conj();
        let diff = gr.eval(s)? - g.eval(s)?;
        let ddiff = g.derivative(s)? - gr.derivative(s)?;
        let v_i = spec.v.column(i).into_owned();
        let omega_i = spec.w.row(i).into_owned();
        let b_i = spec.b.row(i).into_owned();
        let c_i = spec.c.column(i).into_owned();

        let lhs = &gb * &v_i;
        out.right_tangential
            .push(residual(i, i, &lhs, &(diff.adjoint() * &c_i)));

        let lhs = &omega_i * &gc;
        out.left_tangential_transposed
            .push(residual(i, i, &lhs, &(&b_i * diff.adjoint())));

        let lhs = &gc_plain * spec.w_col(i);
        out.left_tangential.push(residual(i, i, &lhs, &(&diff * b_i.adjoint())));

        let lhs = &omega_i * &ga * &v_i;
        out.bitangential
            .push(residual(i, i, &lhs, &(&b_i * ddiff.adjoint() * &c_i)));

        for j in (0..r).filter(|&j| j != i) {
            let v_j = spec.v.column(j).into_owned();
            let c_j = spec.c.column(j).into_owned();
            let lhs = &omega_i * &ga * &v_j;
            let numer = (&b_i * &gb * &v_j - &omega_i * &gc * &c_j) * c64(2.0);
            let denom = (spec.lambda[j] - spec.lambda[i]) * 2.0;
            out.off_diagonal.push(residual(i, j, &lhs, &(numer / denom)));
            out.off_diagonal_swapped.push(residual(i, j, &lhs, &(numer / -denom)));
        }
    }
    Ok(out)
}

/// Sylvester solutions applied to eigenvectors, from the spectral formulas.
#[derive(Debug, Clone)]
pub struct AppendixVectors {
    /// `X_τ w_i`.
    pub x_i_tau: DVector<C64>,
    /// `X w_i`.
    pub x_i: DVector<C64>,
    /// `P_r,τ w_i`.
    pub p_i_tau: DVector<C64>,
    /// `P_r w_i`.
    pub p_i: DVector<C64>,
    /// `Y_τ v_i`.
    pub y_i_tau: DVector<C64>,
    /// `Q_r,τ v_i`.
    pub q_i_tau: DVector<C64>,
}

pub fn appendix_vectors(full: &StateSpaceModel, red: &ReducedModel, h: Horizon, i: usize) -> Result<AppendixVectors> {
    let spec = SpectralDecomposition::new(red)?;
    let exp_a = expm(full.a(), h.tau())?;
    let exp_ar = expm(red.a(), h.tau())?;
    appendix_vectors_with(full, red, h, &spec, &exp_a, &exp_ar, i)
}

fn appendix_vectors_with(
    full: &StateSpaceModel,
    red: &ReducedModel,
    h: Horizon,
    spec: &SpectralDecomposition,
    exp_a: &Matrix,
    exp_ar: &Matrix,
    i: usize,
) -> Result<AppendixVectors> {
    if i >= spec.order() {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue index {i} out of range for order {}",
            spec.order()
        )));
    }
    let tau = h.tau();
    let lambda = spec.lambda[i];
    let s = -lambda.conj();
    let bh: DVector<C64> = spec.b.row(i).adjoint();
    let c_i: DVector<C64> = spec.c.column(i).into_owned();

    // (sI − A)⁻¹ = −(A + λ̄I)⁻¹ with s = −λ̄.
    let decay_bar = (lambda.conj() * tau).exp();
    let decay = (lambda * tau).exp();
    let lu_a = resolvent(full.a(), s)?;
    let lu_ar = resolvent(red.a(), s)?;
    let lu_at = resolvent(&full.a().transpose(), -lambda)?;
    let lu_art = resolvent(&red.a().transpose(), -lambda)?;
    let solve = |lu: &nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>, rhs: DVector<C64>| {
        lu.solve(&rhs).expect("resolvent checked nonsingular")
    };

    let b = to_complex(full.b());
    let br = to_complex(red.b());
    let ct = to_complex(&full.c().transpose());
    let crt = to_complex(&red.c().transpose());
    let ea = to_complex(exp_a);
    let ear = to_complex(exp_ar);

    let b_bh = &b * &bh;
    let br_bh = &br * &bh;
    let ct_c = &ct * &c_i;
    let crt_c = &crt * &c_i;

    Ok(AppendixVectors {
        x_i_tau: solve(&lu_a, &b_bh - &ea * &b_bh * decay_bar),
        x_i: solve(&lu_a, b_bh),
        p_i_tau: solve(&lu_ar, &br_bh - &ear * &br_bh * decay_bar),
        p_i: solve(&lu_ar, br_bh),
        y_i_tau: -solve(&lu_at, &ct_c - ea.transpose() * &ct_c * decay),
        q_i_tau: solve(&lu_art, &crt_c - ear.transpose() * &crt_c * decay),
    })
}

/// Largest relative gap between [`appendix_vectors`] and the Sylvester
/// solutions applied to the eigenvectors, over all `i`.
pub fn appendix_cross_check(full: &StateSpaceModel, red: &ReducedModel, h: Horizon) -> Result<f64> {
    let prepared = PreparedModel::new(full, h)?;
    let ws = prepared.workspace(red)?;
    let spec = SpectralDecomposition::new(red)?;
    let mut worst = 0.0_f64;
    for i in 0..spec.order() {
        let av = appendix_vectors_with(full, red, h, &spec, &ws.exp_a_tau, &ws.exp_ar_tau, i)?;
        let w_i = spec.w_col(i);
        let v_i = spec.v.column(i).into_owned();
        let pairs = [
            (&av.x_i_tau, to_complex(&ws.x_tau) * &w_i),
            (&av.x_i, to_complex(&ws.x) * &w_i),
            (&av.p_i_tau, to_complex(&ws.p_r_tau) * &w_i),
            (&av.p_i, to_complex(&ws.p_r) * &w_i),
            (&av.y_i_tau, to_complex(&ws.y_tau) * &v_i),
            (&av.q_i_tau, to_complex(&ws.q_r_tau) * &v_i),
        ];
        for (closed, solved) in pairs {
            let gap = (closed - &solved).norm() / solved.norm().max(closed.norm()).max(1.0);
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

/// `Tr(CN) = Tr(DM)` given `AM + MB + C = 0` and `NA + BN + D = 0`.
pub fn lemma1_check(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix, m: &Matrix, n: &Matrix) -> Result<bool> {
    let shapes_ok = m.shape() == c.shape()
        && n.shape() == d.shape()
        && a.nrows() == m.nrows()
        && b.ncols() == m.ncols()
        && n.ncols() == a.nrows()
        && n.nrows() == b.ncols();
    if !shapes_ok {
        return Err(Error::DimensionMismatch(
            "Sylvester pair shapes are inconsistent".into(),
        ));
    }
    let scale = |x: &Matrix, y: &Matrix, z: &Matrix| 1.0 + x.norm() + y.norm() + z.norm();
    let r1 = (a * m + m * b + c).norm() / scale(a, b, c) / (1.0 + m.norm());
    let r2 = (n * a + b * n + d).norm() / scale(a, b, d) / (1.0 + n.norm());
    if r1 > 1e-9 || r2 > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "Sylvester residuals {r1:.3e} and {r2:.3e} exceed 1e-9"
        )));
    }
    let lhs = (c * n).trace();
    let rhs = (d * m).trace();
    Ok((lhs - rhs).abs() <= 1e-9 * (lhs.abs() + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub slack: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            steps: 2000,
            seed: 0,
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundTrial {
    /// Sampled `sup_t ‖y(t) − y_r(t)‖₂`.
    pub linf_error: f64,
    pub input_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub h2tau_error: f64,
    pub config: BoundConfig,
    pub trials: Vec<BoundTrial>,
    pub violations: usize,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    pub fn max_linf_error(&self) -> f64 {
        self.trials.iter().map(|t| t.linf_error).fold(0.0, f64::max)
    }
}

/// Zero-order-hold discretization of the error system.
struct Simulator {
    phi: Matrix,
    gamma: Matrix,
    c: Matrix,
    dt: f64,
}

impl Simulator {
    fn new(err: &StateSpaceModel, h: Horizon, steps: usize) -> Self {
        let (n, m) = (err.order(), err.inputs());
        let dt = h.tau() / steps as f64;
        let mut aug = Matrix::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&(err.a() * dt));
        aug.view_mut((0, n), (n, m)).copy_from(&(err.b() * dt));
        let e = expm_unscaled(&aug);
        Self {
            phi: e.view((0, 0), (n, n)).into_owned(),
            gamma: e.view((0, n), (n, m)).into_owned(),
            c: err.c().clone(),
            dt,
        }
    }

    /// Peak output norm over the grid for a piecewise-constant input.
    fn peak(&self, inputs: &[DVector<f64>]) -> f64 {
        let mut x = DVector::zeros(self.phi.nrows());
        let mut peak = 0.0_f64;
        for u in inputs {
            x = &self.phi * x + &self.gamma * u;
            peak = peak.max((&self.c * &x).norm());
        }
        peak
    }

    fn energy(&self, inputs: &[DVector<f64>]) -> f64 {
        (inputs.iter().map(|u| u.norm_squared()).sum::<f64>() * self.dt).sqrt()
    }
}

/// Monte Carlo check of the output bound with random unit-energy inputs.
pub fn output_bound_check(
    full: &StateSpaceModel,
    red: &ReducedModel,
    h: Horizon,
    cfg: BoundConfig,
    exec: Execution,
) -> Result<BoundReport> {
    if cfg.steps == 0 {
        return Err(Error::InvalidArgument("simulation needs at least one step".into()));
    }
    let err = build_error_system(full, red)?;
    let h2 = crate::gramians::h2tau_norm_squared(&err, h)?.max(0.0).sqrt();
    let sim = Simulator::new(&err, h, cfg.steps);
    let m = err.inputs();
    let trials = exec.map_range(cfg.trials, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let mut inputs: Vec<DVector<f64>> = (0..cfg.steps)
            .map(|_| DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let scale = sim.energy(&inputs).recip();
        inputs.iter_mut().for_each(|u| *u *= scale);
        BoundTrial {
            linf_error: sim.peak(&inputs),
            input_norm: sim.energy(&inputs),
        }
    });
    let violations = trials
        .iter()
        .filter(|t| t.linf_error > h2 * t.input_norm.max(1.0) + cfg.slack)
        .count();
    Ok(BoundReport {
        h2tau_error: h2,
        config: cfg,
        trials,
        violations,
    })
}

/// Response to the input aligned with the first output channel's impulse
/// response, scaled to L2τ norm `scale`. For `scale = 1` this nearly attains
/// the bound; larger scales exceed it.
pub fn matched_input_trial(
    full: &StateSpaceModel,
    red: &ReducedModel,
    h: Horizon,
    steps: usize,
    scale: f64,
) -> Result<(BoundTrial, f64)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("simulation needs at least one step".into()));
    }
    let err = build_error_system(full, red)?;
    let h2 = crate::gramians::h2tau_norm_squared(&err, h)?.max(0.0).sqrt();
    let sim = Simulator::new(&err, h, steps);
    let half = expm(err.a(), 0.5 * sim.dt)?;
    let step = expm(err.a(), sim.dt)?;
    // ψ_j = c₀ e^{A_e (j+½)Δ} B_e is the kernel at the midpoint of interval K−1−j.
    let mut row = err.c().rows(0, 1) * half;
    let mut kernel = Vec::with_capacity(steps);
    for _ in 0..steps {
        kernel.push((&row * err.b()).transpose().column(0).into_owned());
        row *= &step;
    }
    kernel.reverse();
    let energy = sim.energy(&kernel);
    if energy == 0.0 {
        return Ok((
            BoundTrial {
                linf_error: 0.0,
                input_norm: 0.0,
            },
            h2,
        ));
    }
    let inputs: Vec<DVector<f64>> = kernel.into_iter().map(|u| u * (scale / energy)).collect();
    Ok((
        BoundTrial {
            linf_error: sim.peak(&inputs),
            input_norm: sim.energy(&inputs),
        },
        h2,
    ))
}
