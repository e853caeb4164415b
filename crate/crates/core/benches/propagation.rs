//! Sequential versus rayon fan-out over the four logical states.
//!
//! `cargo bench -p qgate-core --bench propagation`

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qgate::functionals::Functional;
use qgate::krotov::{Krotov, KrotovConfig};
use qgate::parallel::Execution;
use qgate::propagator::{Propagator, Store};
use qgate::pulse::{default_shape, sample_analytic, AnalyticPulseParams};
use qgate::system::{SystemParams, TransmonSystem};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn systems() -> Vec<(&'static str, TransmonSystem)> {
    vec![
        ("3x3x15", TransmonSystem::new(SystemParams::reduced()).unwrap()),
        ("4x4x30", TransmonSystem::new(SystemParams { qubit_levels: 4, cavity_levels: 30, ..SystemParams::default() }).unwrap()),
    ]
}

fn forward(c: &mut Criterion) {
    let params = AnalyticPulseParams { peak_amplitude: 300.0, duration: 20.0 };
    let mut group = c.benchmark_group("forward_4_states_20ns");
    group.sample_size(10);
    for (name, system) in systems() {
        let field = sample_analytic(&params, 0.05, system.params.envelope).unwrap();
        let initials = system.logical_states().to_vec();
        for (mode, execution) in MODES {
            let prop = Propagator::new(&system).with_execution(execution);
            group.bench_with_input(BenchmarkId::new(mode, name), &initials, |b, initials| {
                b.iter(|| black_box(prop.propagate_all_forward(&field, initials, Store::Final).unwrap()))
            });
        }
    }
    group.finish();
}

fn krotov_iteration(c: &mut Criterion) {
    let params = AnalyticPulseParams { peak_amplitude: 300.0, duration: 20.0 };
    let mut group = c.benchmark_group("krotov_iteration_20ns");
    group.sample_size(10);
    for (name, system) in systems() {
        let field = sample_analytic(&params, 0.05, system.params.envelope).unwrap();
        let shape = default_shape(&field);
        for (mode, execution) in MODES {
            let prop = Propagator::new(&system).with_execution(execution);
            let krotov = Krotov::new(&prop, &system.logical, Functional::Geometric, KrotovConfig::default());
            group.bench_function(BenchmarkId::new(mode, name), |b| {
                b.iter_batched(
                    || krotov.start(field.clone()).unwrap(),
                    |mut it| black_box(krotov.iterate(&mut it, &shape).unwrap()),
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, forward, krotov_iteration);
criterion_main!(benches);
