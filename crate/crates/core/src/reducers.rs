//! Initializers: time-limited balanced truncation and the TL-TSIA fixed-point
//! iteration. Both are Petrov–Galerkin projections `A_r = WᵀAV`, `B_r = WᵀB`,
//! `C_r = CV` with `WᵀV = I`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::cost_grad::PreparedModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Horizon, ReducedModel, StateSpaceModel};

const RANK_TOL: f64 = 1e-12;
const NORMALIZATION_RCOND: f64 = 1e-13;

/// Oblique projection bases with `WᵀV = I_r`.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub v: Matrix,
    pub w: Matrix,
}

impl ProjectionPair {
    /// `‖WᵀV − I‖_F`.
    pub fn normalization_error(&self) -> f64 {
        let r = self.v.ncols();
        (self.w.transpose() * &self.v - Matrix::identity(r, r)).norm()
    }

    pub fn project(&self, full: &StateSpaceModel) -> Result<ReducedModel> {
        let wt = self.w.transpose();
        StateSpaceModel::new(&wt * full.a() * &self.v, &wt * full.b(), full.c() * &self.v)
    }
}

/// `L` with `M = L Lᵀ` from the symmetric eigendecomposition, clipping
/// eigenvalues that round-off pushed below zero.
fn psd_square_root(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(crate::linalg::symmetrize(m));
    let top = eig.eigenvalues.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    let mut l = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > -RANK_TOL * top {
            lambda.max(0.0).sqrt()
        } else {
            0.0
        };
        l.column_mut(j).scale_mut(s);
    }
    l
}

fn check_order(full: &StateSpaceModel, r: usize) -> Result<()> {
    if r == 0 || r > full.order() {
        return Err(Error::InvalidArgument(format!(
            "reduced order must be in 1..={}, got {r}",
            full.order()
        )));
    }
    Ok(())
}

/// Balanced truncation with the time-limited Gramians. The second return value
/// holds the Hankel-like singular values of `RᵀL`, sorted descending.
pub fn tl_bt(full: &StateSpaceModel, h: Horizon, r: usize) -> Result<(ReducedModel, ProjectionPair)> {
    let prepared = PreparedModel::new(full, h)?;
    tl_bt_prepared(&prepared, r).map(|(red, pair, _)| (red, pair))
}

pub fn tl_bt_prepared(prepared: &PreparedModel, r: usize) -> Result<(ReducedModel, ProjectionPair, Vec<f64>)> {
    let full = prepared.model();
    check_order(full, r)?;
    let l = psd_square_root(&prepared.gramians().p_tau);
    let rf = psd_square_root(&prepared.gramians().q_tau);
    let svd = (rf.transpose() * &l).svd(true, true);
    let u = svd.u.expect("requested U");
    let zt = svd.v_t.expect("requested Vᵀ");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma[0];
    let rank = sigma.iter().take_while(|&&s| s >= RANK_TOL * top && s > 0.0).count();
    if rank < r {
        return Err(Error::RankDeficient { requested: r, rank });
    }

    let n = full.order();
    let mut v = Matrix::zeros(n, r);
    let mut w = Matrix::zeros(n, r);
    for (k, &i) in order.iter().take(r).enumerate() {
        let scale = sigma[k].sqrt().recip();
        v.set_column(k, &(&l * zt.row(i).transpose() * scale));
        w.set_column(k, &(&rf * u.column(i) * scale));
    }
    let pair = ProjectionPair { v, w };
    Ok((pair.project(full)?, pair, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsiaConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TsiaConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsiaStep {
    pub iteration: usize,
    pub cost: f64,
    /// Relative change of the stacked `(A_r, B_r, C_r)`.
    pub realization_change: f64,
    /// Spectral distance between consecutive `range(V)` projectors.
    pub subspace_change: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsiaTrace {
    pub initial_cost: f64,
    pub steps: Vec<TsiaStep>,
    pub converged: bool,
    /// Index into `steps` of the returned model; `None` means the init.
    pub best_step: Option<usize>,
}

pub fn tl_tsia(
    full: &StateSpaceModel,
    h: Horizon,
    init: &ReducedModel,
    cfg: TsiaConfig,
) -> Result<(ReducedModel, TsiaTrace)> {
    tl_tsia_prepared(&PreparedModel::new(full, h)?, init, cfg)
}

fn orthonormal_projector(m: &Matrix) -> Matrix {
    let q = m.clone().qr().q();
    &q * q.transpose()
}

fn stacked_norm(m: &ReducedModel) -> f64 {
    (m.a().norm_squared() + m.b().norm_squared() + m.c().norm_squared()).sqrt()
}

fn realization_change(old: &ReducedModel, new: &ReducedModel) -> f64 {
    let diff =
        (new.a() - old.a()).norm_squared() + (new.b() - old.b()).norm_squared() + (new.c() - old.c()).norm_squared();
    diff.sqrt() / stacked_norm(old).max(f64::MIN_POSITIVE)
}

pub fn tl_tsia_prepared(
    prepared: &PreparedModel,
    init: &ReducedModel,
    cfg: TsiaConfig,
) -> Result<(ReducedModel, TsiaTrace)> {
    let full = prepared.model();
    check_order(full, init.order())?;
    full.ensure_io_compatible(init)?;

    let blocks = prepared.time_limited(init)?;
    let initial_cost = prepared.cost_from_blocks(init, &blocks);
    let mut trace = TsiaTrace {
        initial_cost,
        steps: Vec::new(),
        converged: false,
        best_step: None,
    };
    let mut best = (initial_cost, init.clone());
    let mut current = init.clone();
    let mut blocks = blocks;
    let mut projector = orthonormal_projector(&blocks.x_tau);

    for iteration in 1..=cfg.max_iter {
        let x = &blocks.x_tau;
        let y = &blocks.y_tau;
        let ytx = y.transpose() * x;
        let sv = ytx.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > NORMALIZATION_RCOND * smax) {
            return Err(Error::NormalizationSingular);
        }
        let lu = ytx.lu();
        let solve = |m: Matrix| lu.solve(&m).ok_or(Error::NormalizationSingular);
        let next = StateSpaceModel::new(
            solve(y.transpose() * full.a() * x)?,
            solve(y.transpose() * full.b())?,
            full.c() * x,
        )?;

        blocks = prepared.time_limited(&next)?;
        let cost = prepared.cost_from_blocks(&next, &blocks);
        if initial_cost > 0.0 && cost > 10.0 * initial_cost {
            return Err(Error::IterationDiverged {
                iteration,
                cost,
                initial: initial_cost,
            });
        }
        let next_projector = orthonormal_projector(&blocks.x_tau);
        let step = TsiaStep {
            iteration,
            cost,
            realization_change: realization_change(&current, &next),
            subspace_change: (&next_projector - &projector).norm(),
        };
        let done = step.realization_change < cfg.tol || step.subspace_change < cfg.tol;
        trace.steps.push(step);
        if cost < best.0 {
            best = (cost, next.clone());
            trace.best_step = Some(trace.steps.len() - 1);
        }
        current = next;
        projector = next_projector;
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((best.1, trace))
}
