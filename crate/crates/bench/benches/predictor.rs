use std::hint::black_box;

use blindsure_bench::noisy_channel;
use blindsure_core::noise::{mad_noise_level, pca_noise_level};
use blindsure_core::sure::{blind_predict, DivergenceMode};
use blindsure_core::DenoiserSpec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SIZES: [usize; 3] = [256, 1024, 4096];
const WINDOW: usize = 25;

fn noise_estimators(c: &mut Criterion) {
    let mut g = c.benchmark_group("noise_level");
    for n in SIZES {
        let r = noisy_channel(n, 15.0, 7);
        g.bench_with_input(BenchmarkId::new("pca", n), &r, |b, r| b.iter(|| pca_noise_level(black_box(r), WINDOW)));
        g.bench_with_input(BenchmarkId::new("mad", n), &r, |b, r| b.iter(|| mad_noise_level(black_box(r))));
    }
    g.finish();
}

fn blind_prediction(c: &mut Criterion) {
    let mut g = c.benchmark_group("blind_predict");
    for spec in ["soft:1.5", "df(soft:1.5:angular)"] {
        let den = spec.parse::<DenoiserSpec>().unwrap().build().unwrap();
        for n in SIZES {
            let r = noisy_channel(n, 15.0, 7);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            g.bench_with_input(BenchmarkId::new(spec, n), &r, |b, r| {
                b.iter(|| blind_predict(den.as_ref(), black_box(r), WINDOW, DivergenceMode::Mc, &mut rng))
            });
        }
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = noise_estimators, blind_prediction
}
criterion_main!(benches);
