//! TL-H2Opt: BFGS over the entries of `(A_r, B_r, C_r)`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cost_grad::{CostGradient, PreparedModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Horizon, ReducedModel, StateSpaceModel};

const MAX_LINE_SEARCH: usize = 40;
const STEP_FLOOR: f64 = 1e-14;
/// Round-off in `J`, in units of `ε·(‖G‖² + |J|)`.
const COST_NOISE_ULPS: f64 = 16.0;

/// Shape of a reduced model: order, inputs, outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedDims {
    pub r: usize,
    pub m: usize,
    pub p: usize,
}

impl ReducedDims {
    pub fn of(model: &StateSpaceModel) -> Self {
        Self {
            r: model.order(),
            m: model.inputs(),
            p: model.outputs(),
        }
    }

    /// `r² + rm + pr`.
    pub fn len(&self) -> usize {
        self.r * (self.r + self.m + self.p)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn push_row_major(out: &mut Vec<f64>, m: &Matrix) {
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
}

fn pack_parts(a: &Matrix, b: &Matrix, c: &Matrix) -> DVector<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len() + c.len());
    push_row_major(&mut out, a);
    push_row_major(&mut out, b);
    push_row_major(&mut out, c);
    DVector::from_vec(out)
}

/// `A_r`, then `B_r`, then `C_r`, each row-major.
pub fn pack(red: &ReducedModel) -> DVector<f64> {
    pack_parts(red.a(), red.b(), red.c())
}

/// Packs the gradient in the same order as [`pack`], so that the Euclidean
/// inner product equals the sum of the matrix inner products `Tr(XᵀY)`.
pub fn pack_gradient(g: &CostGradient) -> DVector<f64> {
    pack_parts(&g.grad_ar, &g.grad_br, &g.grad_cr)
}

pub fn unpack(v: &DVector<f64>, dims: ReducedDims) -> Result<ReducedModel> {
    if v.len() != dims.len() || dims.r == 0 || dims.m == 0 || dims.p == 0 {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector of length {} does not fit r={}, m={}, p={}",
            v.len(),
            dims.r,
            dims.m,
            dims.p
        )));
    }
    let (r, m, p) = (dims.r, dims.m, dims.p);
    let s = v.as_slice();
    let a = Matrix::from_row_slice(r, r, &s[..r * r]);
    let b = Matrix::from_row_slice(r, m, &s[r * r..r * (r + m)]);
    let c = Matrix::from_row_slice(p, r, &s[r * (r + m)..]);
    StateSpaceModel::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Relative gradient tolerance: stop when `‖∇J‖_∞ < grad_tol·(1 + |J|)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub step_init: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 500,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            step_init: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.wolfe_c1
            && self.wolfe_c1 < self.wolfe_c2
            && self.wolfe_c2 < 1.0
            && self.grad_tol >= 0.0
            && self.step_init > 0.0
            && self.step_init.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid optimizer config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    /// Every trial point along the search direction hit a singular pencil
    /// down to the step floor.
    InfeasibleStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step_length: f64,
    pub cost: f64,
    pub grad_norm: f64,
    pub sufficient_decrease: bool,
    pub curvature: bool,
    pub evaluations: usize,
    pub hessian_updated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    #[serde(skip)]
    pub model: Option<ReducedModel>,
    pub config: OptimizerConfig,
    /// `J` at the init followed by `J` after each accepted step.
    pub cost_trace: Vec<f64>,
    /// `‖∇J‖_∞` matching `cost_trace`.
    pub grad_norm_trace: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub wall_seconds: f64,
    /// `J` and `‖∇J‖_∞` at the returned model.
    pub cost: f64,
    pub grad_norm: f64,
}

impl OptimizationReport {
    pub fn initial_cost(&self) -> f64 {
        self.cost_trace[0]
    }

    pub fn final_cost(&self) -> f64 {
        self.cost
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.grad_norm
    }

    pub fn reduced(&self) -> &ReducedModel {
        self.model.as_ref().expect("report carries its model")
    }
}

#[derive(Debug, Clone)]
struct Point {
    x: DVector<f64>,
    j: f64,
    /// `|J_ctrl − J_obs|`, an estimate of the round-off in `j`.
    j_gap: f64,
    g: DVector<f64>,
}

struct Objective<'a> {
    prepared: &'a PreparedModel,
    dims: ReducedDims,
    evaluations: usize,
}

impl Objective<'_> {
    /// `Ok(None)` marks an infeasible point, treated as `J = +∞`.
    fn eval(&mut self, x: DVector<f64>) -> Result<Option<Point>> {
        self.evaluations += 1;
        let red = match unpack(&x, self.dims) {
            Ok(red) => red,
            Err(Error::NonFinite(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        match self.prepared.evaluate(&red) {
            Ok(cg) if cg.j.is_finite() => {
                let g = pack_gradient(&cg);
                if g.iter().all(|v| v.is_finite()) {
                    Ok(Some(Point {
                        x,
                        j: cg.j,
                        j_gap: (cg.j - cg.j_observability).abs(),
                        g,
                    }))
                } else {
                    Ok(None)
                }
            }
            Ok(_) => Ok(None),
            Err(Error::SingularPencil { .. } | Error::NonConvergence { .. } | Error::NonFinite(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

enum Search {
    Accepted { point: Point, alpha: f64 },
    Failed,
    Infeasible,
}

struct Trial {
    alpha: f64,
    phi: f64,
    dphi: f64,
    point: Option<Point>,
}

fn trial(obj: &mut Objective<'_>, x: &DVector<f64>, d: &DVector<f64>, alpha: f64) -> Result<Trial> {
    let p = obj.eval(x + d * alpha)?;
    Ok(match p {
        Some(p) => Trial {
            alpha,
            phi: p.j,
            dphi: p.g.dot(d),
            point: Some(p),
        },
        None => Trial {
            alpha,
            phi: f64::INFINITY,
            dphi: f64::NAN,
            point: None,
        },
    })
}

/// Minimizer of the cubic through `(lo, φ_lo, φ'_lo)` and `(hi, φ_hi, φ'_hi)`,
/// kept away from the interval ends; bisection if the cubic is unusable.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !hi.phi.is_finite() || !hi.dphi.is_finite() {
        return mid;
    }
    let d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
    let disc = d1 * d1 - lo.dphi * hi.dphi;
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let alpha = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
    let (left, right) = (a.min(b), a.max(b));
    let margin = 0.1 * (right - left);
    if alpha.is_finite() {
        alpha.clamp(left + margin, right - margin)
    } else {
        mid
    }
}

/// Strong-Wolfe search. `J` is a difference of traces of size `‖G‖²` and
/// loses digits when the error is small. Within `slack` of `φ(0)` sufficient
/// decrease is judged from the slope instead, `φ'(α) ≤ (2c₁ − 1) φ'(0)`.
fn line_search(
    obj: &mut Objective<'_>,
    at: &Point,
    d: &DVector<f64>,
    alpha0: f64,
    cfg: &OptimizerConfig,
    slack: f64,
) -> Result<Search> {
    let phi0 = at.j;
    let dphi0 = at.g.dot(d);
    let armijo = |t: &Trial| {
        t.phi <= phi0 + cfg.wolfe_c1 * t.alpha * dphi0
            || (t.phi <= phi0 + slack && t.dphi <= (2.0 * cfg.wolfe_c1 - 1.0) * dphi0)
    };
    let curvature = |t: &Trial| t.dphi.abs() <= -cfg.wolfe_c2 * dphi0;

    let mut prev = Trial {
        alpha: 0.0,
        phi: phi0,
        dphi: dphi0,
        point: None,
    };
    let mut alpha = alpha0;
    let mut any_feasible = false;
    let (mut lo, mut hi) = (None, None);

    for i in 0..MAX_LINE_SEARCH {
        let t = trial(obj, &at.x, d, alpha)?;
        any_feasible |= t.point.is_some();
        if !armijo(&t) || (i > 0 && t.phi > prev.phi + slack) {
            lo = Some(prev);
            hi = Some(t);
            break;
        }
        if curvature(&t) {
            let alpha = t.alpha;
            return Ok(Search::Accepted {
                point: t.point.expect("finite trial is feasible"),
                alpha,
            });
        }
        if t.dphi >= 0.0 {
            lo = Some(t);
            hi = Some(prev);
            break;
        }
        alpha = 2.0 * t.alpha;
        prev = t;
    }
    let (Some(mut lo), Some(mut hi)) = (lo, hi) else {
        return Ok(Search::Failed);
    };

    for _ in 0..MAX_LINE_SEARCH {
        if (hi.alpha - lo.alpha).abs() < STEP_FLOOR * (1.0 + lo.alpha.abs()) {
            break;
        }
        let alpha = interpolate(&lo, &hi);
        let t = trial(obj, &at.x, d, alpha)?;
        any_feasible |= t.point.is_some();
        if !armijo(&t) || t.phi > lo.phi + slack {
            hi = t;
            continue;
        }
        if curvature(&t) {
            return Ok(Search::Accepted {
                point: t.point.expect("finite trial is feasible"),
                alpha,
            });
        }
        if t.dphi * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = t;
    }
    Ok(if any_feasible {
        Search::Failed
    } else {
        Search::Infeasible
    })
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut Matrix, s: &DVector<f64>, y: &DVector<f64>) {
    let rho = 1.0 / y.dot(s);
    let hy = &*h * y;
    let yhy = y.dot(&hy);
    h.ger(-rho, &hy, s, 1.0);
    h.ger(-rho, s, &hy, 1.0);
    h.ger(rho * rho * yhy + rho, s, s, 1.0);
}

pub fn tl_h2opt(
    full: &StateSpaceModel,
    h: Horizon,
    init: &ReducedModel,
    cfg: OptimizerConfig,
) -> Result<OptimizationReport> {
    tl_h2opt_prepared(&PreparedModel::new(full, h)?, init, cfg)
}

pub fn tl_h2opt_prepared(
    prepared: &PreparedModel,
    init: &ReducedModel,
    cfg: OptimizerConfig,
) -> Result<OptimizationReport> {
    cfg.validate()?;
    prepared.model().ensure_io_compatible(init)?;
    let started = Instant::now();
    let dims = ReducedDims::of(init);
    let mut obj = Objective {
        prepared,
        dims,
        evaluations: 0,
    };

    let cg = prepared.evaluate(init)?;
    let mut current = Point {
        x: pack(init),
        j: cg.j,
        j_gap: (cg.j - cg.j_observability).abs(),
        g: pack_gradient(&cg),
    };
    let norm_sq = prepared.norm_squared().abs();
    let noise = |j: f64| COST_NOISE_ULPS * f64::EPSILON * (norm_sq + j.abs());
    let slack = |p: &Point| noise(p.j) + 8.0 * p.j_gap;
    let n = dims.len();
    let mut cost_trace = vec![current.j];
    let mut grad_norm_trace = vec![current.g.amax()];
    let mut steps = Vec::new();
    let mut best = current.clone();
    let mut hinv = Matrix::identity(n, n);
    let mut scaled = false;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    loop {
        if current.g.amax() < cfg.grad_tol * (1.0 + current.j.abs()) {
            termination = Termination::GradientTolerance;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        let mut d = -(&hinv * &current.g);
        if !(d.dot(&current.g) < 0.0) {
            hinv = Matrix::identity(n, n);
            scaled = false;
            d = -current.g.clone();
        }
        let alpha0 = if scaled {
            cfg.step_init
        } else {
            cfg.step_init * (1.0 / d.amax()).min(1.0)
        };
        let evals_before = obj.evaluations;
        let next = match line_search(&mut obj, &current, &d, alpha0, &cfg, slack(&current))? {
            Search::Accepted { point, alpha } => (point, alpha),
            Search::Failed => {
                termination = Termination::LineSearchFailed;
                break;
            }
            Search::Infeasible => {
                termination = Termination::InfeasibleStep;
                break;
            }
        };
        let (point, alpha) = next;
        iterations += 1;

        let s = &point.x - &current.x;
        let y = &point.g - &current.g;
        let sy = s.dot(&y);
        let updated = sy > f64::EPSILON * s.norm() * y.norm() && sy > 0.0;
        if updated {
            if !scaled {
                hinv = Matrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            bfgs_update(&mut hinv, &s, &y);
        }
        let dphi0 = current.g.dot(&d);
        steps.push(StepRecord {
            iteration: iterations,
            step_length: alpha,
            cost: point.j,
            grad_norm: point.g.amax(),
            sufficient_decrease: point.j <= current.j + cfg.wolfe_c1 * alpha * dphi0
                || (point.j <= current.j + slack(&current) && point.g.dot(&d) <= (2.0 * cfg.wolfe_c1 - 1.0) * dphi0),
            curvature: point.g.dot(&d).abs() <= -cfg.wolfe_c2 * dphi0,
            evaluations: obj.evaluations - evals_before,
            hessian_updated: updated,
        });
        cost_trace.push(point.j);
        grad_norm_trace.push(point.g.amax());
        if point.j < best.j {
            best = point.clone();
        }
        current = point;
    }
    // Steps inside the noise band may raise J slightly; never hand back a
    // model measurably worse than one already seen.
    let chosen = if current.j > best.j + noise(best.j) {
        &best
    } else {
        &current
    };

    Ok(OptimizationReport {
        model: Some(unpack(&chosen.x, dims)?),
        config: cfg,
        cost_trace,
        grad_norm_trace,
        steps,
        termination,
        iterations,
        evaluations: obj.evaluations,
        wall_seconds: started.elapsed().as_secs_f64(),
        cost: chosen.j,
        grad_norm: chosen.g.amax(),
    })
}
