use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfg_core::config::parse_config;
use mfg_core::experiments::run_sweep_with;
use mfg_core::Execution;

const SWEEP: &str = r#"
[problem]
sigma = 0.0
alpha = 2.0
[grid]
nx = 65
[solver]
tol = 1e-8
[sweep]
sigma = [0.0, 5.0, 10.0, 20.0]
horizons = [0.5, 1.0, 2.0]
dt = 0.02
refine = false
"#;

fn sweep(c: &mut Criterion) {
    let cfg = parse_config(SWEEP).unwrap();
    let mut group = c.benchmark_group("sweep_4x3");
    group.sample_size(10);
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get().max(2));
    for (name, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::ParallelWith { threads }),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep_with(&cfg, Some(exec)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
