#![allow(dead_code)]

use fusedg_core::data::{generate_synthetic, DgTask, DomainShift, SynthShiftSpec};
use fusedg_core::distances::Discriminator;
use fusedg_core::experiment::{DatasetKind, ExperimentSpec, Target};
use fusedg_core::network::{ModelConfig, ModelParams};
use fusedg_core::training::{model_config_for, total_loss, Batch, TrainConfig};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small three-domain task that trains in well under a second per epoch.
pub fn small_spec(seed: u64, shifted: bool) -> SynthShiftSpec {
    let shifts = if shifted {
        vec![
            DomainShift { amplitude: 0.6, phase: 0.0, noise: 0.1, drift: -0.5 },
            DomainShift { amplitude: 1.0, phase: 0.5, noise: 0.1, drift: 0.0 },
            DomainShift { amplitude: 1.6, phase: 1.0, noise: 0.1, drift: 0.5 },
            DomainShift { amplitude: 2.4, phase: 1.5, noise: 0.1, drift: 1.0 },
        ]
    } else {
        vec![DomainShift::default(); 4]
    };
    SynthShiftSpec {
        num_classes: 3,
        channels: 2,
        timesteps: 24,
        windows_per_class: 12,
        shifts,
        test_domain: 0,
        val_fraction: 0.25,
        seed,
    }
}

pub fn small_task(seed: u64, shifted: bool) -> DgTask {
    generate_synthetic(&small_spec(seed, shifted)).unwrap()
}

pub fn small_model(task: &DgTask) -> ModelConfig {
    model_config_for(
        task,
        &ModelConfig {
            conv1_filters: 4,
            conv1_kernel: 3,
            conv2_filters: 4,
            conv2_kernel: 3,
            pool: 2,
            branch_width: 8,
            domain_hidden: 6,
            ..ModelConfig::default()
        },
    )
}

pub fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 24,
        max_epochs: 5,
        patience: 5,
        seed,
        ..TrainConfig::default()
    }
}

/// The desk-scale synthetic experiment: four strongly shifted domains,
/// settings picked on data and run seeds disjoint from the ones used here.
pub fn desk_spec() -> ExperimentSpec {
    ExperimentSpec {
        dataset: DatasetKind::Synthetic,
        synthetic: SynthShiftSpec::strong_shift(0),
        target: Target::All,
        seeds: 5,
        val_fraction: 0.2,
        model: ModelConfig {
            conv1_filters: 8,
            conv1_kernel: 6,
            conv2_filters: 16,
            conv2_kernel: 9,
            pool: 2,
            branch_width: 32,
            domain_hidden: 16,
            ..ModelConfig::default()
        },
        train: TrainConfig {
            lambda: 0.01,
            beta: 0.5,
            learning_rate: 0.01,
            batch_size: 96,
            max_epochs: 30,
            patience: 10,
            ..TrainConfig::default()
        },
        ..ExperimentSpec::default()
    }
}

pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        channels: 2,
        timesteps: 12,
        num_domains: 3,
        num_classes: 3,
        conv1_filters: 2,
        conv1_kernel: 3,
        conv2_filters: 2,
        conv2_kernel: 2,
        pool: 2,
        branch_width: 4,
        domain_hidden: 4,
    }
}

pub fn random_batch(cfg: &ModelConfig, per: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = per * cfg.num_domains;
    Batch {
        x: Array3::from_shape_fn((n, cfg.channels, cfg.timesteps), |_| rng.random_range(-1.5..1.5)),
        labels: (0..n).map(|_| rng.random_range(0..cfg.num_classes)).collect(),
        domains: (0..n).map(|i| i / per).collect(),
    }
}

/// Largest relative error between the analytic gradient of the total loss
/// and central differences, over every parameter of the tiny model.
pub fn worst_gradient_error(config: &TrainConfig, discs: &[Discriminator], seed: u64) -> (String, f64) {
    let cfg = tiny_model();
    let mut params = ModelParams::init(&cfg, seed).unwrap();
    assert!(params.len() <= 2000, "{}", params.len());
    // nonzero biases keep every ReLU input away from its hinge
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
    for (name, block) in params.groups_mut() {
        if name.ends_with("bias") {
            block.iter_mut().for_each(|v| *v = rng.random_range(0.05..0.3) * if rng.random() { 1.0 } else { -1.0 });
        }
    }
    let batch = random_batch(&cfg, 4, seed + 100);
    let out = total_loss(&batch, &params, config, discs).unwrap();
    let analytic = out.grads.groups();
    let h = 1e-6;
    let mut worst = (String::new(), 0.0);
    for (g, (name, block)) in analytic.iter().enumerate() {
        for i in 0..block.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.groups_mut()[g].1[i] += delta;
                total_loss(&batch, &p, config, discs).unwrap().losses.total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (fd - block[i]).abs() / fd.abs().max(block[i].abs()).max(1e-6);
            if err >= worst.1 {
                worst = (format!("{name}[{i}]"), err);
            }
        }
    }
    worst
}

pub fn gradient_check(config: &TrainConfig, discs: &[Discriminator], seed: u64) {
    let (at, err) = worst_gradient_error(config, discs, seed);
    assert!(err < 1e-4, "{at}: relative error {err}");
}
