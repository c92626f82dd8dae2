use fusedg_core::distances::{coral_loss, mmd_squared, KernelSpec};
use fusedg_core::evaluation::{confusion_matrix, micro_roc_auc, precision_recall_f1};
use fusedg_core::network::{forward, one_hot, Fusion, Mode, ModelConfig, ModelParams, WEIGHT_FLOOR};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    rows.prop_flat_map(move |n| {
        prop::collection::vec(-3.0f64..3.0, n * cols)
            .prop_map(move |v| Array2::from_shape_vec((n, cols), v).unwrap())
    })
}

fn pair(cols: usize) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (matrix(2..7, cols), matrix(2..7, cols))
}

fn labels(n: usize, c: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (prop::collection::vec(0..c, n), prop::collection::vec(0..c, n))
}

fn weighted_f1_by_hand(truth: &[usize], pred: &[usize], c: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..c {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == k && **p == k).count() as f64;
        let predicted = pred.iter().filter(|p| **p == k).count() as f64;
        let support = truth.iter().filter(|t| **t == k).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        total += support * f1;
    }
    total / truth.len() as f64
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        channels: 2,
        timesteps: 12,
        num_domains: 3,
        num_classes: 4,
        conv1_filters: 2,
        conv1_kernel: 3,
        conv2_filters: 3,
        conv2_kernel: 2,
        pool: 2,
        branch_width: 5,
        domain_hidden: 4,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mmd_is_zero_on_identical_batches(a in matrix(2..8, 3)) {
        let out = mmd_squared(&a.view(), &a.view(), &KernelSpec::default()).unwrap();
        prop_assert!(out.value.abs() < 1e-12);
    }

    #[test]
    fn mmd_is_symmetric_and_non_negative((a, b) in pair(3)) {
        let spec = KernelSpec::default();
        let ab = mmd_squared(&a.view(), &b.view(), &spec).unwrap().value;
        let ba = mmd_squared(&b.view(), &a.view(), &spec).unwrap().value;
        prop_assert!(ab >= -1e-12);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
    }

    #[test]
    fn coral_is_zero_on_identical_batches(a in matrix(2..8, 3)) {
        prop_assert_eq!(coral_loss(&a.view(), &a.view()).unwrap().value, 0.0);
    }

    #[test]
    fn coral_is_symmetric_and_non_negative((a, b) in pair(4)) {
        let ab = coral_loss(&a.view(), &b.view()).unwrap().value;
        let ba = coral_loss(&b.view(), &a.view()).unwrap().value;
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn weighted_f1_matches_brute_force((truth, pred) in labels(30, 4)) {
        let m = precision_recall_f1(&confusion_matrix(&truth, &pred, 4).unwrap());
        prop_assert!((m.weighted_f1 - weighted_f1_by_hand(&truth, &pred, 4)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&m.weighted_f1));
    }

    #[test]
    fn weighted_f1_ignores_sample_order((truth, pred) in labels(25, 3), rot in 0usize..25) {
        let score = |t: &[usize], p: &[usize]| precision_recall_f1(&confusion_matrix(t, p, 3).unwrap()).weighted_f1;
        let mut t2 = truth.clone();
        let mut p2 = pred.clone();
        t2.rotate_left(rot);
        p2.rotate_left(rot);
        prop_assert_eq!(score(&truth, &pred), score(&t2, &p2));
    }

    #[test]
    fn weighted_equals_macro_with_equal_supports(pred in prop::collection::vec(0usize..3, 18)) {
        let truth: Vec<usize> = (0..18).map(|i| i % 3).collect();
        let m = precision_recall_f1(&confusion_matrix(&truth, &pred, 3).unwrap());
        prop_assert!((m.weighted_f1 - m.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn roc_auc_is_bounded_and_monotone(raw in matrix(5..20, 3), seed in 0usize..3) {
        let probs = {
            let e = raw.mapv(f64::exp);
            let s = e.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
            e / &s
        };
        let truth: Vec<usize> = (0..probs.nrows()).map(|i| (i + seed) % 3).collect();
        let roc = micro_roc_auc(&probs.view(), &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&roc.auc));
        prop_assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fusion_weights_stay_on_the_simplex(seed in 0u64..1_000_000, scale in 0.1f64..20.0) {
        let cfg = tiny_model();
        let params = ModelParams::init(&cfg, seed).unwrap();
        let x = Array3::from_shape_fn((3, cfg.channels, cfg.timesteps), |(n, c, t)| {
            scale * ((seed as f64 + 1.3 * n as f64 + 0.7 * c as f64 + 0.37 * t as f64).sin())
        });
        let trace = forward(&x.view(), &params, Mode::Infer, Fusion::Predicted).unwrap();
        for row in trace.weights.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&w| w >= WEIGHT_FLOOR * 0.999 && w <= 1.0));
        }
        let domains: Vec<usize> = (0..3).map(|n| (seed as usize + n) % cfg.num_domains).collect();
        let hot = one_hot(&domains, cfg.num_domains);
        let fixed = forward(&x.view(), &params, Mode::Infer, Fusion::Fixed(hot.view())).unwrap();
        for (n, &k) in domains.iter().enumerate() {
            prop_assert_eq!(fixed.fused.row(n), trace.branch_features[k].row(n));
        }
    }
}
