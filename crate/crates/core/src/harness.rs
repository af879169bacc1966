//! End-to-end drivers: reduce one model, sweep over orders, generate test
//! models. Used by the CLI and the benches.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cost_grad::PreparedModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Horizon, ReducedModel, StateSpaceModel};
use crate::optimizer::{tl_h2opt_prepared, OptimizationReport, OptimizerConfig, Termination};
use crate::parallel::Execution;
use crate::reducers::{tl_bt_prepared, tl_tsia_prepared, TsiaConfig, TsiaTrace};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// `MORTL_SEED` if set and parseable, else `fallback`.
pub fn seed_from_env(fallback: u64) -> u64 {
    std::env::var("MORTL_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(fallback)
}

/// Random `n`-state model with `A = D + 0.1·N`, `D` diagonal with entries
/// log-spaced in `[−10, −0.1]`, and `N`, `B`, `C` standard normal.
pub fn random_model(n: usize, m: usize, p: usize, seed: u64) -> Result<StateSpaceModel> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "model dimensions must be positive, got n={n}, m={m}, p={p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let diag = DVector::from_fn(n, |k, _| {
        let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
        -(10f64.powf(-1.0 + 2.0 * t))
    });
    let a = Matrix::from_diagonal(&diag) + normal(n, n) * 0.1;
    let b = normal(n, m);
    let c = normal(p, n);
    StateSpaceModel::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initializer {
    TlBt,
    TlTsia,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TlBt,
    TlTsia,
    TlH2opt,
}

impl std::str::FromStr for Initializer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tl-bt" => Ok(Self::TlBt),
            "tl-tsia" => Ok(Self::TlTsia),
            _ => Err(Error::InvalidArgument(format!("unknown initializer '{s}'"))),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tl-bt" => Ok(Self::TlBt),
            "tl-tsia" => Ok(Self::TlTsia),
            "tl-h2opt" => Ok(Self::TlH2opt),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub method: Method,
    pub init: Option<Initializer>,
    pub order: usize,
    pub tau: Horizon,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub tsia: TsiaConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    pub config: ReduceConfig,
    pub full_order: usize,
    /// `‖G‖_{H2,τ}`.
    pub full_norm: f64,
    /// `J = ‖G − G_r‖²_{H2,τ}`.
    pub cost: f64,
    /// `‖G − G_r‖_{H2,τ}`.
    pub error: f64,
    pub relative_error: f64,
    /// `‖∇J‖_∞` at the returned model.
    pub grad_norm: f64,
    /// Error of the initializer when the method is `tl-h2opt`.
    pub init_error: Option<f64>,
    pub singular_values: Option<Vec<f64>>,
    pub tsia: Option<TsiaTrace>,
    pub optimizer: Option<OptimizationReport>,
    pub wall_seconds: f64,
}

fn initialize(
    prepared: &PreparedModel,
    init: Initializer,
    r: usize,
    tsia: TsiaConfig,
) -> Result<(ReducedModel, Vec<f64>, Option<TsiaTrace>)> {
    let (bt, _, sigma) = tl_bt_prepared(prepared, r)?;
    match init {
        Initializer::TlBt => Ok((bt, sigma, None)),
        Initializer::TlTsia => {
            let (red, trace) = tl_tsia_prepared(prepared, &bt, tsia)?;
            Ok((red, sigma, Some(trace)))
        }
    }
}

fn error_of(j: f64) -> f64 {
    j.max(0.0).sqrt()
}

pub fn reduce(full: &StateSpaceModel, cfg: ReduceConfig) -> Result<(ReducedModel, ReductionReport)> {
    let started = Instant::now();
    let prepared = PreparedModel::new(full, cfg.tau)?;
    reduce_prepared(&prepared, cfg, started)
}

fn reduce_prepared(
    prepared: &PreparedModel,
    cfg: ReduceConfig,
    started: Instant,
) -> Result<(ReducedModel, ReductionReport)> {
    let (red, sigma, tsia, optimizer, init_error) = match cfg.method {
        Method::TlBt => {
            let (red, sigma, _) = initialize(prepared, Initializer::TlBt, cfg.order, cfg.tsia)?;
            (red, sigma, None, None, None)
        }
        Method::TlTsia => {
            let (red, sigma, trace) = initialize(prepared, Initializer::TlTsia, cfg.order, cfg.tsia)?;
            (red, sigma, trace, None, None)
        }
        Method::TlH2opt => {
            let init = cfg
                .init
                .ok_or_else(|| Error::InvalidArgument("tl-h2opt needs an initializer (tl-bt or tl-tsia)".into()))?;
            let (start, sigma, trace) = initialize(prepared, init, cfg.order, cfg.tsia)?;
            let report = tl_h2opt_prepared(prepared, &start, cfg.optimizer)?;
            let init_error = error_of(report.initial_cost());
            (report.reduced().clone(), sigma, trace, Some(report), Some(init_error))
        }
    };
    let eval = prepared.evaluate(&red)?;
    let full_norm = error_of(prepared.norm_squared());
    let error = error_of(eval.j);
    let report = ReductionReport {
        config: cfg,
        full_order: prepared.model().order(),
        full_norm,
        cost: eval.j,
        error,
        relative_error: if full_norm > 0.0 { error / full_norm } else { 0.0 },
        grad_norm: eval.norm_inf(),
        init_error,
        singular_values: Some(sigma),
        tsia,
        optimizer,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((red, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub tau: Horizon,
    pub r_min: usize,
    pub r_max: usize,
    pub step: usize,
    pub init: Initializer,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub tsia: TsiaConfig,
    /// When false, `seconds` is written as 0 so that output is reproducible
    /// byte for byte.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub r: usize,
    /// `None` when the initializer failed.
    pub err_init: Option<f64>,
    pub err_opt: Option<f64>,
    pub delta_err_pct: Option<f64>,
    pub iters: usize,
    pub seconds: f64,
    pub termination: Option<Termination>,
    pub failure: Option<String>,
}

/// `100·(err_init − err_opt)/err_init`, or 0 when `err_init` is 0.
pub fn delta_err_pct(err_init: f64, err_opt: f64) -> f64 {
    if err_init > 0.0 {
        100.0 * (err_init - err_opt) / err_init
    } else {
        0.0
    }
}

fn sweep_row(prepared: &PreparedModel, cfg: &SweepConfig, r: usize) -> BenchmarkRow {
    let started = Instant::now();
    let mut row = BenchmarkRow {
        r,
        err_init: None,
        err_opt: None,
        delta_err_pct: None,
        iters: 0,
        seconds: 0.0,
        termination: None,
        failure: None,
    };
    match initialize(prepared, cfg.init, r, cfg.tsia) {
        Err(e) => row.failure = Some(e.to_string()),
        Ok((start, _, _)) => match tl_h2opt_prepared(prepared, &start, cfg.optimizer) {
            Err(e) => row.failure = Some(e.to_string()),
            Ok(rep) => {
                let (ei, eo) = (error_of(rep.initial_cost()), error_of(rep.final_cost()));
                row.err_init = Some(ei);
                row.err_opt = Some(eo);
                row.delta_err_pct = Some(delta_err_pct(ei, eo));
                row.iters = rep.iterations;
                row.termination = Some(rep.termination);
            }
        },
    }
    if cfg.timing {
        row.seconds = started.elapsed().as_secs_f64();
    }
    row
}

/// One row per order in `r_min..=r_max` (stride `step`), sorted by `r`.
/// A failing order is recorded in its row and the sweep continues.
pub fn sweep(full: &StateSpaceModel, cfg: SweepConfig, exec: Execution) -> Result<Vec<BenchmarkRow>> {
    if cfg.r_min == 0 || cfg.r_min > cfg.r_max || cfg.step == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid order range {}..={} step {}",
            cfg.r_min, cfg.r_max, cfg.step
        )));
    }
    if cfg.r_max >= full.order() {
        return Err(Error::InvalidArgument(format!(
            "largest order {} must be below the model order {}",
            cfg.r_max,
            full.order()
        )));
    }
    let prepared = PreparedModel::new(full, cfg.tau)?;
    let orders: Vec<usize> = (cfg.r_min..=cfg.r_max).step_by(cfg.step).collect();
    Ok(exec.map(orders, |r| sweep_row(&prepared, &cfg, r)))
}

fn fmt_opt(v: Option<f64>, missing: &str) -> String {
    v.map_or_else(|| missing.to_string(), |x| x.to_string())
}

/// Columns `r, err_init, err_opt, delta_err_pct, iters, seconds`. Rows whose
/// initializer failed carry `diverged` in place of the errors.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[BenchmarkRow]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("CSV output failed: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["r", "err_init", "err_opt", "delta_err_pct", "iters", "seconds"])
        .map_err(csv_err)?;
    for row in rows {
        w.write_record([
            row.r.to_string(),
            fmt_opt(row.err_init, "diverged"),
            fmt_opt(row.err_opt, "diverged"),
            fmt_opt(row.delta_err_pct, "diverged"),
            row.iters.to_string(),
            row.seconds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("CSV output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_arithmetic() {
        assert_eq!(delta_err_pct(2.0, 1.0), 50.0);
        assert_eq!(delta_err_pct(1.5, 1.5), 0.0);
        assert_eq!(delta_err_pct(0.0, 0.0), 0.0);
    }

    #[test]
    fn random_model_is_seeded() {
        let a = random_model(6, 2, 1, 7).unwrap();
        let b = random_model(6, 2, 1, 7).unwrap();
        let c = random_model(6, 2, 1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(random_model(0, 1, 1, 0).is_err());
    }

    #[test]
    fn h2opt_requires_init() {
        let full = random_model(5, 1, 1, 3).unwrap();
        let cfg = ReduceConfig {
            method: Method::TlH2opt,
            init: None,
            order: 2,
            tau: Horizon::new(1.0).unwrap(),
            optimizer: OptimizerConfig::default(),
            tsia: TsiaConfig::default(),
        };
        assert!(matches!(reduce(&full, cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn full_order_bt_report() {
        let full = random_model(4, 1, 2, 11).unwrap();
        let cfg = ReduceConfig {
            method: Method::TlBt,
            init: None,
            order: 4,
            tau: Horizon::new(1.0).unwrap(),
            optimizer: OptimizerConfig::default(),
            tsia: TsiaConfig::default(),
        };
        let (_, rep) = reduce(&full, cfg).unwrap();
        assert!(rep.cost < 1e-10);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            BenchmarkRow {
                r: 2,
                err_init: Some(2.0),
                err_opt: Some(1.0),
                delta_err_pct: Some(50.0),
                iters: 7,
                seconds: 0.0,
                termination: None,
                failure: None,
            },
            BenchmarkRow {
                r: 3,
                err_init: None,
                err_opt: None,
                delta_err_pct: None,
                iters: 0,
                seconds: 0.0,
                termination: None,
                failure: Some("x".into()),
            },
        ];
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &rows).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "r,err_init,err_opt,delta_err_pct,iters,seconds\n2,2,1,50,7,0\n3,diverged,diverged,diverged,0,0\n"
        );
    }
}
