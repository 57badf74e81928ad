//! Benchmarks of the pipeline's hot paths: hand-crafted feature extraction
//! and the SDLM forward pass.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha8Rng;

use mbfd_core::backbones::{sdlm::CnnConfig, CnnModel};
use mbfd_core::features::extract_raw;
use mbfd_core::nn::Mode;
use mbfd_core::preprocess::{self, Method};

fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn bench_features(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let signal = random_signal(&mut rng, 4800);
    c.bench_function("features/extract_4800", |b| {
        b.iter(|| extract_raw(&signal, 12_000.0).unwrap())
    });
}

fn bench_preprocess(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((1000, 15), |_| rng.gen_range(-1.0..1.0));
    c.bench_function("preprocess/fit_apply_ss_1000x15", |b| {
        b.iter(|| {
            let t = preprocess::fit(Method::Ss, x.view()).unwrap();
            preprocess::apply(&t, x.view()).unwrap()
        })
    });
}

fn bench_sdlm_forward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = CnnModel::new(CnnConfig::full(4800, 3), &mut rng);
    let batch = Array2::from_shape_fn((4, 4800), |_| rng.gen_range(-1.0..1.0));
    c.bench_function("sdlm/forward_eval_4x4800", |b| {
        b.iter_batched(
            || batch.clone(),
            |x| model.forward(&x, Mode::Eval),
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_features, bench_preprocess, bench_sdlm_forward
}
criterion_main!(benches);
