use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hdp_transport::hierarchy::nested_wasserstein;
use hdp_transport::{wasserstein, MeasureEnsemble};
use hdp_transport_bench::lattice_measure;

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein");
    // sizes on both sides of the dense solver cutoff
    for n in [5usize, 30, 100, 300] {
        let g = lattice_measure(n, 2, 0.0);
        let gp = lattice_measure(n, 2, 0.37);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| wasserstein(black_box(&g), black_box(&gp), 2.0).unwrap())
        });
    }
    group.finish();
}

fn nested(c: &mut Criterion) {
    let mut group = c.benchmark_group("nested");
    group.sample_size(10);
    for members in [20usize, 100] {
        let a = MeasureEnsemble::new((0..members).map(|i| lattice_measure(4, 1, i as f64 * 0.013)).collect()).unwrap();
        let b = MeasureEnsemble::new((0..members).map(|i| lattice_measure(3, 1, 0.5 + i as f64 * 0.007)).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(members), &members, |bench, _| {
            bench.iter(|| nested_wasserstein(black_box(&a), black_box(&b), 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exact, nested);
criterion_main!(benches);
