use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use vtol_core::clf::sweep_gain_grid;
use vtol_core::experiments::canonical_scenario;
use vtol_core::sim::{run, AugmentedState, ClosedLoop};
use vtol_core::{ControllerKind, SimConfig};

fn vector_field(c: &mut Criterion) {
    for kind in [ControllerKind::InvOpt, ControllerKind::Fbl] {
        let cfg = canonical_scenario().with_controller(kind);
        let cl = ClosedLoop::new(cfg.clone()).unwrap();
        let a = AugmentedState {
            plant: cfg.initial_plant,
            compensator: cfg.initial_compensator,
            cost: 0.0,
        };
        c.bench_function(&format!("closed_loop_deriv/{kind}"), |b| {
            b.iter(|| cl.closed_loop_deriv(black_box(&a)).unwrap())
        });
    }
}

fn one_second(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_1s");
    group.sample_size(20);
    for kind in [ControllerKind::InvOpt, ControllerKind::Fbl] {
        let cfg = SimConfig {
            t_final: 1.0,
            ..canonical_scenario().with_controller(kind)
        };
        group.bench_function(kind.as_str(), |b| b.iter(|| run(black_box(&cfg)).unwrap()));
    }
    group.finish();
}

fn clf_sweep(c: &mut Criterion) {
    c.bench_function("clf_sweep_25x25", |b| {
        b.iter(|| sweep_gain_grid(black_box(0.2), black_box(1e6), 25).unwrap())
    });
}

criterion_group!(benches, vector_field, one_second, clf_sweep);
criterion_main!(benches);
