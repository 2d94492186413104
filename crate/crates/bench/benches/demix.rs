use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hdp_transport::deconv::eta_mle;
use hdp_transport::measures::sample_mixture;
use hdp_transport::{BoundedDomain, DemixConfig, DiscreteMeasure, KernelFamily, KernelModel, Seed};

fn em(c: &mut Criterion) {
    let domain = BoundedDomain::new(vec![-2.0], vec![2.0]).unwrap();
    let q0 = DiscreteMeasure::from_parts(domain.clone(), vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let cfg = DemixConfig::default();
    let mut group = c.benchmark_group("eta_mle");
    group.sample_size(10);
    for family in [KernelFamily::Gaussian, KernelFamily::Laplace] {
        let kernel = KernelModel::new(family, 0.3, 1).unwrap();
        for n in [250usize, 2000] {
            let data = sample_mixture(&q0, &kernel, n, &mut Seed(1).rng()).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{family:?}"), n), &n, |b, _| {
                b.iter(|| eta_mle(black_box(&data), &kernel, &domain, &cfg, Seed(2)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, em);
criterion_main!(benches);
