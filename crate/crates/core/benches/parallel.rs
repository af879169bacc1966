use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mortl_core::harness::{random_model, sweep, Initializer, SweepConfig};
use mortl_core::optimizer::OptimizerConfig;
use mortl_core::reducers::{tl_bt, TsiaConfig};
use mortl_core::verifier::{output_bound_check, BoundConfig};
use mortl_core::{Execution, Horizon};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bound_trials(c: &mut Criterion) {
    let full = random_model(20, 2, 2, 1).unwrap();
    let h = Horizon::new(1.0).unwrap();
    let (red, _) = tl_bt(&full, h, 4).unwrap();
    let cfg = BoundConfig {
        trials: 32,
        steps: 1000,
        ..Default::default()
    };
    let mut group = c.benchmark_group("output_bound_check");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| output_bound_check(black_box(&full), &red, h, cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn order_sweep(c: &mut Criterion) {
    let full = random_model(24, 2, 2, 2).unwrap();
    let cfg = SweepConfig {
        tau: Horizon::new(1.0).unwrap(),
        r_min: 2,
        r_max: 7,
        step: 1,
        init: Initializer::TlBt,
        optimizer: OptimizerConfig {
            max_iter: 40,
            ..Default::default()
        },
        tsia: TsiaConfig::default(),
        timing: false,
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep(black_box(&full), cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bound_trials, order_sweep);
criterion_main!(benches);
