use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treevasion::ensemble::random::{random_ensemble, random_instance, RandomEnsembleConfig};
use treevasion::symbolic::{best_single_change, brute_force_single_change};

fn single_change(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_change");
    for n_trees in [100, 300, 1000] {
        let mut rng = ChaCha8Rng::seed_from_u64(n_trees as u64);
        let cfg = RandomEnsembleConfig {
            n_trees,
            max_depth: 4,
            n_features: 50,
            full: true,
            grid_prob: 0.0,
            ..Default::default()
        };
        let model = random_ensemble(&mut rng, &cfg);
        let x = random_instance(&mut rng, cfg.n_features);
        group.bench_with_input(BenchmarkId::new("symbolic", n_trees), &x, |b, x| {
            b.iter(|| best_single_change(&model, black_box(x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("brute_force", n_trees), &x, |b, x| {
            b.iter(|| brute_force_single_change(&model, black_box(x), 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = single_change
}
criterion_main!(benches);
