use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fusedg_core::distances::{coral_loss, mmd_squared, KernelSpec};
use fusedg_core::network::layers::conv_forward;
use fusedg_core::network::{forward, Fusion, Mode, ModelConfig, ModelParams};
use fusedg_core::training::{total_loss, Batch, TrainConfig};
use ndarray::{Array1, Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model() -> ModelConfig {
    ModelConfig {
        channels: 9,
        timesteps: 125,
        num_domains: 3,
        num_classes: 19,
        ..ModelConfig::default()
    }
}

fn batch(cfg: &ModelConfig, per: usize) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = per * cfg.num_domains;
    Batch {
        x: Array3::from_shape_fn((n, cfg.channels, cfg.timesteps), |_| rng.random_range(-1.0..1.0)),
        labels: (0..n).map(|i| i % cfg.num_classes).collect(),
        domains: (0..n).map(|i| i / per).collect(),
    }
}

fn network(c: &mut Criterion) {
    let cfg = model();
    let params = ModelParams::init(&cfg, 0).unwrap();
    let b = batch(&cfg, 42);
    c.bench_function("forward_infer_126", |bench| {
        bench.iter(|| forward(black_box(&b.x.view()), &params, Mode::Infer, Fusion::Predicted).unwrap())
    });
    let config = TrainConfig::default();
    c.bench_function("loss_and_gradients_126", |bench| {
        bench.iter(|| total_loss(black_box(&b), &params, &config, &[]).unwrap())
    });
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let input = Array4::from_shape_fn((64, 1, 9, 125), |_| rng.random_range(-1.0..1.0));
    let weight = Array3::from_shape_fn((16, 1, 6), |_| rng.random_range(-0.3..0.3));
    let bias = Array1::zeros(16);
    c.bench_function("conv_forward_64x9x125", |bench| {
        bench.iter(|| conv_forward(black_box(&input), &weight, &bias).unwrap())
    });
}

fn distances(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Array2::from_shape_fn((42, 256), |_| rng.random_range(-1.0..1.0));
    let b = Array2::from_shape_fn((42, 256), |_| rng.random_range(-1.0..1.0));
    let spec = KernelSpec::default();
    c.bench_function("mmd_42x256", |bench| {
        bench.iter(|| mmd_squared(black_box(&a.view()), &b.view(), &spec).unwrap())
    });
    c.bench_function("coral_42x256", |bench| {
        bench.iter(|| coral_loss(black_box(&a.view()), &b.view()).unwrap())
    });
}

criterion_group!(benches, network, conv, distances);
criterion_main!(benches);
