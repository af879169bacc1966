use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use mortl_core::cost_grad::PreparedModel;
use mortl_core::harness::{self, seed_from_env, Initializer, Method, ReduceConfig, SweepConfig, DEFAULT_SEED};
use mortl_core::io::{load_model, save_model, write_matrix_market};
use mortl_core::optimizer::OptimizerConfig;
use mortl_core::reducers::TsiaConfig;
use mortl_core::verifier::{interpolation_residuals, output_bound_check, BoundConfig};
use mortl_core::{Error, Execution, Horizon, Result, StateSpaceModel};
use serde_json::json;

use crate::{Command, InitArg, MethodArg};

const IDENTITY_TOL: f64 = 1e-8;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout(), $($arg)*);
    }};
}

/// 2 for bad arguments, 1 for numerical and IO failures.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

impl From<InitArg> for Initializer {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::TlBt => Initializer::TlBt,
            InitArg::TlTsia => Initializer::TlTsia,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(a: MethodArg) -> Self {
        match a {
            MethodArg::TlBt => Method::TlBt,
            MethodArg::TlTsia => Method::TlTsia,
            MethodArg::TlH2opt => Method::TlH2opt,
        }
    }
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    optimizer: OptimizerConfig,
    tsia: TsiaConfig,
}

fn read_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn load(path: &Path, tau: Option<f64>) -> Result<(String, StateSpaceModel, Horizon)> {
    let (manifest, model) = load_model(path)?;
    let h = match (tau, manifest.tau) {
        (Some(t), _) => Horizon::new(t)?,
        (None, Some(h)) => h,
        (None, None) => {
            return Err(Error::InvalidArgument(format!(
                "no --tau given and {} has no default",
                path.display()
            )))
        }
    };
    Ok((manifest.name, model, h))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Reduce {
            model,
            tau,
            order,
            method,
            init,
            config,
            out,
        } => {
            if matches!(method, MethodArg::TlH2opt) && init.is_none() {
                return Err(Error::InvalidArgument("--method tl-h2opt requires --init".into()));
            }
            let file_cfg = read_config(config.as_deref())?;
            let (name, full, h) = load(&model, tau)?;
            let cfg = ReduceConfig {
                method: method.into(),
                init: init.map(Into::into),
                order,
                tau: h,
                optimizer: file_cfg.optimizer,
                tsia: file_cfg.tsia,
            };
            let (red, report) = harness::reduce(&full, cfg)?;
            let red_name = format!("{name}_r{order}");
            let manifest = save_model(&red, &out, &red_name, Some(h))?;
            let report_path = out.join(format!("{red_name}.report.json"));
            let doc = json!({
                "model": model,
                "reduced": manifest,
                "seed": seed_from_env(DEFAULT_SEED),
                "report": report,
            });
            write_file(&report_path, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            say!(
                "order {order}: J = {:e}, error = {:e} (relative {:e}), |grad|_inf = {:e}",
                report.cost,
                report.error,
                report.relative_error,
                report.grad_norm
            );
            if let Some(e0) = report.init_error {
                say!(
                    "initializer error {e0:e}, improvement {:.4}%",
                    harness::delta_err_pct(e0, report.error)
                );
            }
            say!("wrote {}", manifest.display());
            say!("wrote {}", report_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            model,
            tau,
            r_min,
            r_max,
            step,
            init,
            config,
            out,
            no_timing,
            sequential,
        } => {
            let file_cfg = read_config(config.as_deref())?;
            let (_, full, h) = load(&model, tau)?;
            let cfg = SweepConfig {
                tau: h,
                r_min,
                r_max,
                step,
                init: init.into(),
                optimizer: file_cfg.optimizer,
                tsia: file_cfg.tsia,
                timing: !no_timing,
            };
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let rows = harness::sweep(&full, cfg, exec)?;
            for row in rows.iter().filter(|r| r.failure.is_some()) {
                eprintln!("order {}: {}", row.r, row.failure.as_deref().unwrap_or(""));
            }
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    harness::write_sweep_csv(io::BufWriter::new(file), &rows)?;
                }
                None => harness::write_sweep_csv(io::stdout().lock(), &rows)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            model,
            reduced,
            tau,
            grad_tol,
            trials,
            seed,
            json,
        } => verify(&model, &reduced, tau, grad_tol, trials, seed, json),
        Command::Gramians { model, tau, out } => {
            let (name, full, h) = load(&model, tau)?;
            let prepared = PreparedModel::new(&full, h)?;
            let g = prepared.gramians();
            let ctrl = g.norm_squared_controllability(&full);
            let obs = g.norm_squared_observability(&full);
            say!(
                "model {name}: n = {}, m = {}, p = {}, tau = {}",
                full.order(),
                full.inputs(),
                full.outputs(),
                h.tau()
            );
            say!("Tr(C P_tau C^T) = {ctrl:e}");
            say!("Tr(B^T Q_tau B) = {obs:e}");
            say!("H2,tau norm     = {:e}", ctrl.max(0.0).sqrt());
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|source| Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                write_matrix_market(&dir.join("P_tau.mtx"), &g.p_tau)?;
                write_matrix_market(&dir.join("Q_tau.mtx"), &g.q_tau)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            states,
            inputs,
            outputs,
            seed,
            tau,
            name,
            out,
        } => {
            let seed = seed.unwrap_or_else(|| seed_from_env(DEFAULT_SEED));
            let tau = tau.map(Horizon::new).transpose()?;
            let m = harness::random_model(states, inputs, outputs, seed)?;
            let path = save_model(&m, &out, &name, tau)?;
            say!("wrote {} (seed {seed})", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn verify(
    model: &Path,
    reduced: &Path,
    tau: Option<f64>,
    grad_tol: f64,
    trials: usize,
    seed: Option<u64>,
    as_json: bool,
) -> Result<ExitCode> {
    let (_, full, h) = load(model, tau)?;
    let (_, red) = load_model(reduced)?;
    let seed = seed.unwrap_or_else(|| seed_from_env(DEFAULT_SEED));

    let eval = PreparedModel::new(&full, h)?.evaluate(&red)?;
    let grad = eval.norm_inf();
    let grad_ok = grad < grad_tol * (1.0 + eval.j.abs());

    let (interp, warning) = match interpolation_residuals(&full, &red, h) {
        Ok(r) => (Some(r), None),
        Err(e @ (Error::NonDiagonalizable { .. } | Error::RepeatedPoles { .. } | Error::SingularResolvent { .. })) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let interp_ok = interp.as_ref().is_none_or(|r| r.max_residual() < IDENTITY_TOL);

    let bound_cfg = BoundConfig {
        trials,
        seed,
        ..Default::default()
    };
    let bound = output_bound_check(&full, &red, h, bound_cfg, Execution::Parallel)?;
    let all_ok = grad_ok && interp_ok && bound.holds();

    if as_json {
        let doc = json!({
            "tau": h.tau(),
            "seed": seed,
            "cost": eval.j,
            "grad_norm_inf": grad,
            "grad_tol": grad_tol,
            "gradient_ok": grad_ok,
            "interpolation": interp,
            "interpolation_warning": warning,
            "interpolation_ok": interp_ok,
            "bound": bound,
            "bound_ok": bound.holds(),
            "ok": all_ok,
        });
        say!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        let mut out = io::stdout().lock();
        let _ = writeln!(out, "J = {:e}, H2,tau error = {:e}", eval.j, eval.j.max(0.0).sqrt());
        let _ = writeln!(
            out,
            "[{}] gradient: |grad J|_inf = {grad:e} (tol {:e})",
            pass(grad_ok),
            grad_tol * (1.0 + eval.j.abs())
        );
        match (&interp, &warning) {
            (Some(r), _) => {
                let _ = writeln!(
                    out,
                    "[{}] interpolation identities: max residual {:e}, max lhs {:e}",
                    pass(interp_ok),
                    r.max_residual(),
                    r.max_lhs()
                );
                let (transposed, plain) = r.left_orientation_holds(IDENTITY_TOL);
                let _ = writeln!(
                    out,
                    "       left tangential: transposed form {}, column form {}",
                    pass(transposed),
                    pass(plain)
                );
                let swapped = r.off_diagonal_swapped.iter().map(|x| x.residual).fold(0.0, f64::max);
                let _ = writeln!(
                    out,
                    "       off-diagonal with swapped denominator: max residual {swapped:e}"
                );
            }
            (None, Some(w)) => {
                let _ = writeln!(out, "[WARN] interpolation identities skipped: {w}");
            }
            (None, None) => {}
        }
        let _ = writeln!(
            out,
            "[{}] output bound: {} trials, max |y - y_r| = {:e} <= {:e}, violations {}",
            pass(bound.holds()),
            bound.trials.len(),
            bound.max_linf_error(),
            bound.h2tau_error,
            bound.violations
        );
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
