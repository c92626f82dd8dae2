use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};

/// Every learnable parameter of the fused network. Also used to hold
/// gradients (same shapes).
///
/// Dense weights are `[in, out]`; convolution weights `[out, in, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub conv1_w: Array3<f64>,
    pub conv1_b: Array1<f64>,
    pub conv2_w: Array3<f64>,
    pub conv2_b: Array1<f64>,
    pub branch_w: Vec<Array2<f64>>,
    pub branch_b: Vec<Array1<f64>>,
    pub domain_w1: Array2<f64>,
    pub domain_b1: Array1<f64>,
    pub domain_w2: Array2<f64>,
    pub domain_b2: Array1<f64>,
    pub class_w: Array2<f64>,
    pub class_b: Array1<f64>,
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> impl FnMut() -> f64 + '_ {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    move || rng.random_range(-limit..limit)
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let f = config.feature_len();
        let k = config.num_domains;
        Self {
            config: config.clone(),
            conv1_w: Array3::zeros((config.conv1_filters, 1, config.conv1_kernel)),
            conv1_b: Array1::zeros(config.conv1_filters),
            conv2_w: Array3::zeros((config.conv2_filters, config.conv1_filters, config.conv2_kernel)),
            conv2_b: Array1::zeros(config.conv2_filters),
            branch_w: (0..k).map(|_| Array2::zeros((f, config.branch_width))).collect(),
            branch_b: (0..k).map(|_| Array1::zeros(config.branch_width)).collect(),
            domain_w1: Array2::zeros((f, config.domain_hidden)),
            domain_b1: Array1::zeros(config.domain_hidden),
            domain_w2: Array2::zeros((config.domain_hidden, k)),
            domain_b2: Array1::zeros(k),
            class_w: Array2::zeros((config.branch_width, config.num_classes)),
            class_b: Array1::zeros(config.num_classes),
        }
    }

    /// Glorot-uniform weights, zero biases, seeded.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(config);
        let c = config;
        let f = c.feature_len();
        p.conv1_w.mapv_inplace({
            let mut g = glorot(&mut rng, c.conv1_kernel, c.conv1_filters * c.conv1_kernel);
            move |_| g()
        });
        p.conv2_w.mapv_inplace({
            let mut g = glorot(
                &mut rng,
                c.conv1_filters * c.conv2_kernel,
                c.conv2_filters * c.conv2_kernel,
            );
            move |_| g()
        });
        for w in &mut p.branch_w {
            let mut g = glorot(&mut rng, f, c.branch_width);
            w.mapv_inplace(|_| g());
        }
        p.domain_w1.mapv_inplace({
            let mut g = glorot(&mut rng, f, c.domain_hidden);
            move |_| g()
        });
        p.domain_w2.mapv_inplace({
            let mut g = glorot(&mut rng, c.domain_hidden, c.num_domains);
            move |_| g()
        });
        p.class_w.mapv_inplace({
            let mut g = glorot(&mut rng, c.branch_width, c.num_classes);
            move |_| g()
        });
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    /// Parameter blocks with their names, in the fixed serialization order:
    /// conv1, conv2, each branch, domain classifier, activity classifier.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("conv1.weight".into(), slice(&self.conv1_w)),
            ("conv1.bias".into(), slice(&self.conv1_b)),
            ("conv2.weight".into(), slice(&self.conv2_w)),
            ("conv2.bias".into(), slice(&self.conv2_b)),
        ];
        for (k, (w, b)) in self.branch_w.iter().zip(&self.branch_b).enumerate() {
            out.push((format!("branch{k}.weight"), slice(w)));
            out.push((format!("branch{k}.bias"), slice(b)));
        }
        out.extend([
            ("domain.hidden.weight".to_string(), slice(&self.domain_w1)),
            ("domain.hidden.bias".to_string(), slice(&self.domain_b1)),
            ("domain.out.weight".to_string(), slice(&self.domain_w2)),
            ("domain.out.bias".to_string(), slice(&self.domain_b2)),
            ("classifier.weight".to_string(), slice(&self.class_w)),
            ("classifier.bias".to_string(), slice(&self.class_b)),
        ]);
        out
    }

    /// Mutable view of [`ModelParams::groups`], same order.
    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("conv1.weight".into(), slice_mut(&mut self.conv1_w)),
            ("conv1.bias".into(), slice_mut(&mut self.conv1_b)),
            ("conv2.weight".into(), slice_mut(&mut self.conv2_w)),
            ("conv2.bias".into(), slice_mut(&mut self.conv2_b)),
        ];
        for (k, (w, b)) in self.branch_w.iter_mut().zip(self.branch_b.iter_mut()).enumerate() {
            out.push((format!("branch{k}.weight"), slice_mut(w)));
            out.push((format!("branch{k}.bias"), slice_mut(b)));
        }
        out.extend([
            ("domain.hidden.weight".to_string(), slice_mut(&mut self.domain_w1)),
            ("domain.hidden.bias".to_string(), slice_mut(&mut self.domain_b1)),
            ("domain.out.weight".to_string(), slice_mut(&mut self.domain_w2)),
            ("domain.out.bias".to_string(), slice_mut(&mut self.domain_b2)),
            ("classifier.weight".to_string(), slice_mut(&mut self.class_w)),
            ("classifier.bias".to_string(), slice_mut(&mut self.class_b)),
        ]);
        out
    }

    pub fn len(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }

    /// Checks that every block has the shape implied by `config`.
    pub fn check_shapes(&self) -> Result<()> {
        let expected = Self::zeros(&self.config);
        for ((name, a), (_, b)) in self.groups().iter().zip(expected.groups()) {
            if a.len() != b.len() {
                return Err(Error::shape("params", format!("{name} has {} values, expected {}", a.len(), b.len())));
            }
        }
        if self.branch_w.len() != self.config.num_domains {
            return Err(Error::shape("params", "branch count differs from num_domains"));
        }
        Ok(())
    }

    /// `self += scale · other`, block by block.
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParams) {
        for ((_, a), (_, b)) in self.groups_mut().into_iter().zip(other.groups()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}
