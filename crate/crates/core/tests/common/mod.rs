//! Independent reference computations used only by the integration tests.
#![allow(dead_code)]

use mortl_core::cost_grad::PreparedModel;
use mortl_core::optimizer::{pack, unpack, ReducedDims};
use mortl_core::{Horizon, Matrix, ReducedModel, StateSpaceModel};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `-shift·I + scale·N`, stable for a large enough shift.
pub fn shifted(rng: &mut ChaCha8Rng, n: usize, shift: f64, scale: f64) -> Matrix {
    Matrix::identity(n, n) * -shift + randn(rng, n, n) * scale
}

pub fn model(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize, shift: f64) -> StateSpaceModel {
    StateSpaceModel::new(shifted(rng, n, shift, 0.4), randn(rng, n, m), randn(rng, p, n)).unwrap()
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// `e^{At}` by Taylor series on a scaled argument followed by squaring.
pub fn taylor_expm(a: &Matrix, t: f64) -> Matrix {
    let n = a.nrows();
    let x = a * t;
    let norm = x.abs().column_sum().max();
    let squarings = if norm > 0.125 {
        (norm / 0.125).log2().ceil() as i32
    } else {
        0
    };
    let x = x / 2f64.powi(squarings);
    let mut term = Matrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &x / k as f64;
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on `P_k`.
pub fn gauss_legendre(k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=k {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 10-point Gauss–Legendre on `[0, tau]`, doubling the panel count
/// until two successive estimates agree to `1e-12` relative.
pub fn quadrature<F: Fn(f64) -> Matrix>(f: F, tau: f64) -> Matrix {
    let rule = gauss_legendre(10);
    let estimate = |panels: usize| {
        let width = tau / panels as f64;
        let mut acc: Option<Matrix> = None;
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * width;
            for &(x, w) in &rule {
                let v = f(mid + 0.5 * width * x) * (0.5 * width * w);
                acc = Some(match acc {
                    Some(a) => a + v,
                    None => v,
                });
            }
        }
        acc.unwrap()
    };
    let mut panels = 2;
    let mut prev = estimate(panels);
    loop {
        panels *= 2;
        let next = estimate(panels);
        let scale = next.norm().max(1e-300);
        if (&next - &prev).norm() <= 1e-12 * scale || panels >= 4096 {
            return next;
        }
        prev = next;
    }
}

/// `∫₀^τ e^{At} B Bᵀ e^{Aᵀt} dt`.
pub fn gramian_quadrature(m: &StateSpaceModel, tau: f64) -> Matrix {
    quadrature(
        |t| {
            let eb = taylor_expm(m.a(), t) * m.b();
            &eb * eb.transpose()
        },
        tau,
    )
}

/// `∫₀^τ ‖C e^{At} B − C_r e^{A_r t} B_r‖²_F dt`.
pub fn error_norm_quadrature(full: &StateSpaceModel, red: &ReducedModel, tau: f64) -> f64 {
    quadrature(
        |t| {
            let d = full.c() * taylor_expm(full.a(), t) * full.b() - red.c() * taylor_expm(red.a(), t) * red.b();
            Matrix::from_element(1, 1, d.norm_squared())
        },
        tau,
    )[(0, 0)]
}

/// Solves `AX + XB + C = 0` through the vectorized Kronecker system.
pub fn kron_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Matrix {
    let (n, m) = (a.nrows(), b.nrows());
    let k = Matrix::identity(m, m).kronecker(a) + b.transpose().kronecker(&Matrix::identity(n, n));
    let rhs = -DVector::from_column_slice(c.as_slice());
    let x = k.full_piv_lu().solve(&rhs).expect("Kronecker system singular");
    Matrix::from_column_slice(n, m, x.as_slice())
}

/// Time-limited Gramian of `(A, B)` from the Kronecker solve and the Taylor exponential.
pub fn kron_gramian(a: &Matrix, b: &Matrix, tau: f64) -> Matrix {
    let e = taylor_expm(a, tau);
    let bb = b * b.transpose();
    kron_sylvester(a, &a.transpose(), &(&bb - &e * &bb * e.transpose()))
}

/// Eigenvalues as roots of the characteristic polynomial: coefficients from
/// Faddeev–LeVerrier, roots from the companion matrix.
pub fn companion_eigenvalues(a: &Matrix) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = Matrix::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + Matrix::identity(n, n) * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    let mut comp = Matrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -coeffs[j + 1];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Largest distance in a greedy nearest matching of two spectra.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut left: Vec<Complex<f64>> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = left
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        left.swap_remove(k);
    }
    worst
}

/// Error-system realization built directly from the blocks.
pub fn error_blocks(full: &StateSpaceModel, red: &ReducedModel) -> (Matrix, Matrix, Matrix) {
    let (n, r) = (full.order(), red.order());
    let mut a = Matrix::zeros(n + r, n + r);
    a.view_mut((0, 0), (n, n)).copy_from(full.a());
    a.view_mut((n, n), (r, r)).copy_from(red.a());
    let mut b = Matrix::zeros(n + r, full.inputs());
    b.view_mut((0, 0), (n, full.inputs())).copy_from(full.b());
    b.view_mut((n, 0), (r, full.inputs())).copy_from(red.b());
    let mut c = Matrix::zeros(full.outputs(), n + r);
    c.view_mut((0, 0), (full.outputs(), n)).copy_from(full.c());
    c.view_mut((0, n), (full.outputs(), r)).copy_from(&-red.c());
    (a, b, c)
}

/// Central-difference gradient of the cost in packed coordinates.
pub fn fd_gradient(prepared: &PreparedModel, red: &ReducedModel, h: f64) -> DVector<f64> {
    let dims = ReducedDims::of(red);
    let x = pack(red);
    let j = |v: DVector<f64>| prepared.evaluate(&unpack(&v, dims).unwrap()).unwrap().j;
    DVector::from_fn(x.len(), |k, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[k] += h;
        dn[k] -= h;
        (j(up) - j(dn)) / (2.0 * h)
    })
}

fn integral_exp(alpha: f64) -> f64 {
    if alpha.abs() < 1e-12 {
        1.0 + 0.5 * alpha
    } else {
        alpha.exp_m1() / alpha
    }
}

/// Closed-form cost of the scalar model `(a, b, c)` against
/// `A = diag(−1, −10)`, `B = [1; 1]`, `C = [1, 1]` over `[0, 1]`.
pub fn scalar_oracle_cost(a: f64, b: f64, c: f64) -> f64 {
    let k = b * c;
    integral_exp(-2.0) + 2.0 * integral_exp(-11.0) + integral_exp(-20.0)
        - 2.0 * k * (integral_exp(a - 1.0) + integral_exp(a - 10.0))
        + k * k * integral_exp(2.0 * a)
}

pub fn scalar_oracle_model() -> (StateSpaceModel, Horizon) {
    (
        StateSpaceModel::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -10.0]),
            Matrix::from_row_slice(2, 1, &[1.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap(),
        Horizon::new(1.0).unwrap(),
    )
}

/// Nelder–Mead on `f` from `x0` with initial simplex edge `step`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|i| {
            let mut x = x0.to_vec();
            if i > 0 {
                x[i - 1] += step;
            }
            let v = f(&x);
            (x, v)
        })
        .collect();
    for _ in 0..iters {
        simplex.sort_by(|p, q| p.1.total_cmp(&q.1));
        if (simplex[n].1 - simplex[0].1).abs() <= 1e-16 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = (0..n).map(|k| best[k] + 0.5 * (p.0[k] - best[k])).collect();
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|p, q| p.1.total_cmp(&q.1));
    simplex.swap_remove(0)
}

/// Exhaustive grid over `(a, b, c)` followed by repeated Nelder–Mead polishing.
pub fn scalar_oracle_minimum() -> f64 {
    let mut best = (vec![0.0; 3], f64::INFINITY);
    for ia in 0..=200 {
        let a = -20.0 + 0.1 * ia as f64;
        for ib in 1..=20 {
            let b = 0.15 * ib as f64;
            for ic in -20..=20 {
                let c = 0.15 * ic as f64;
                let v = scalar_oracle_cost(a, b, c);
                if v < best.1 {
                    best = (vec![a, b, c], v);
                }
            }
        }
    }
    let f = |x: &[f64]| scalar_oracle_cost(x[0], x[1], x[2]);
    let mut step = 0.1;
    for _ in 0..6 {
        best = nelder_mead(f, &best.0, step, 5000);
        step *= 0.3;
    }
    best.1
}

/// Random reduced model with well separated real and complex poles.
pub fn diagonalizable_reduced(rng: &mut ChaCha8Rng, r: usize, m: usize, p: usize) -> ReducedModel {
    let mut d = Matrix::zeros(r, r);
    let mut k = 0;
    while k < r {
        if k + 1 < r && rng.random_bool(0.5) {
            let re = -0.5 - 2.0 * rng.random::<f64>() - k as f64;
            let im = 0.5 + rng.random::<f64>();
            d[(k, k)] = re;
            d[(k + 1, k + 1)] = re;
            d[(k, k + 1)] = im;
            d[(k + 1, k)] = -im;
            k += 2;
        } else {
            d[(k, k)] = -0.5 - 2.0 * rng.random::<f64>() - k as f64;
            k += 1;
        }
    }
    let t = Matrix::identity(r, r) + randn(rng, r, r) * 0.3;
    let tinv = t.clone().try_inverse().unwrap();
    StateSpaceModel::new(&t * d * tinv, randn(rng, r, m), randn(rng, p, r)).unwrap()
}

pub type CMat = DMatrix<Complex<f64>>;
