use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::check_batches;
use crate::error::Result;

/// Discriminator probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

/// Two-layer feed-forward domain discriminator `x ↦ σ(w₂·relu(W₁ᵀx + b₁) + b₂)`.
///
/// One discriminator is kept per unordered pair of domains. The same type
/// holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let l1 = (6.0 / (input + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        Self {
            w1: Array2::from_shape_fn((input, hidden), |_| rng.random_range(-l1..l1)),
            b1: Array1::zeros(hidden),
            w2: Array1::from_shape_fn(hidden, |_| rng.random_range(-l2..l2)),
            b2: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array1::zeros(self.w2.len()),
            b2: 0.0,
        }
    }

    /// Parameter blocks in a fixed order.
    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.b2),
        ]
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            std::slice::from_ref(&self.b2),
        ]
    }

    /// Returns `(hidden pre-activations, clamped probabilities, clamp mask)`.
    fn forward(&self, x: &ArrayView2<f64>) -> (Array2<f64>, Array1<f64>, Vec<bool>) {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&self.w2) + self.b2;
        let mut clamped = Vec::with_capacity(logits.len());
        let probs = logits.mapv(|z| {
            let p = 1.0 / (1.0 + (-z).exp());
            let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            clamped.push(c != p);
            c
        });
        (pre, probs, clamped)
    }

    pub fn probabilities(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        self.forward(x).1
    }

    /// Backpropagates `d loss / d prob` for each row; accumulates parameter
    /// gradients into `grads` and returns the input gradient.
    fn backward(
        &self,
        x: &ArrayView2<f64>,
        pre: &Array2<f64>,
        probs: &Array1<f64>,
        clamped: &[bool],
        dprob: &Array1<f64>,
        grads: &mut Discriminator,
    ) -> Array2<f64> {
        let dlogit: Array1<f64> = probs
            .iter()
            .zip(dprob)
            .zip(clamped)
            .map(|((&p, &g), &c)| if c { 0.0 } else { g * p * (1.0 - p) })
            .collect();
        let hidden = pre.mapv(|v| v.max(0.0));
        grads.b2 += dlogit.sum();
        grads.w2 += &hidden.t().dot(&dlogit);
        let mut dpre = dlogit.insert_axis(Axis(1)).dot(&self.w2.view().insert_axis(Axis(0)));
        dpre.zip_mut_with(pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        grads.w1 += &x.t().dot(&dpre);
        grads.b1 += &dpre.sum_axis(Axis(0));
        dpre.dot(&self.w1.t())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialOutput {
    pub value: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
    /// Gradient of `value` with respect to the discriminator. The
    /// discriminator ascends it while the features descend their gradients.
    pub grad_disc: Discriminator,
}

/// `mean_a log D(a) + mean_b log(1 − D(b))` for the pair's discriminator.
///
/// The discriminator maximizes this value (pushing it towards 0 from below),
/// the feature path minimizes it; callers apply the sign flip on the
/// discriminator side.
pub fn pairwise_adversarial_loss(
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    disc: &Discriminator,
) -> Result<AdversarialOutput> {
    check_batches(a, b, "pairwise_adversarial_loss")?;
    if a.ncols() != disc.w1.nrows() {
        return Err(crate::Error::shape(
            "pairwise_adversarial_loss",
            format!("discriminator expects {} inputs, got {}", disc.w1.nrows(), a.ncols()),
        ));
    }
    let (na, nb) = (a.nrows() as f64, b.nrows() as f64);
    let (pre_a, pa, ca) = disc.forward(a);
    let (pre_b, pb, cb) = disc.forward(b);
    let value = pa.mapv(f64::ln).sum() / na + pb.mapv(|p| (1.0 - p).ln()).sum() / nb;
    let mut grad_disc = disc.zeros_like();
    let da = pa.mapv(|p| 1.0 / (p * na));
    let db = pb.mapv(|p| -1.0 / ((1.0 - p) * nb));
    let grad_a = disc.backward(a, &pre_a, &pa, &ca, &da, &mut grad_disc);
    let grad_b = disc.backward(b, &pre_b, &pb, &cb, &db, &mut grad_disc);
    Ok(AdversarialOutput {
        value,
        grad_a,
        grad_b,
        grad_disc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_half(d: usize) -> Discriminator {
        Discriminator {
            w1: Array2::zeros((d, 3)),
            b1: Array1::zeros(3),
            w2: Array1::zeros(3),
            b2: 0.0,
        }
    }

    #[test]
    fn constant_half_discriminator() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[0.0, -1.0]];
        let out = pairwise_adversarial_loss(&a.view(), &b.view(), &constant_half(2)).unwrap();
        assert!((out.value + 1.38629).abs() < 1e-5);
        assert!((out.value - 2.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn separable_batches_approach_zero() {
        // D(x) = σ(1000·relu(x) − 500): ≈1 for x = 1, ≈0 for x = 0
        let disc = Discriminator {
            w1: array![[1.0]],
            b1: array![0.0],
            w2: array![1000.0],
            b2: -500.0,
        };
        let a = array![[1.0], [1.0]];
        let b = array![[0.0], [0.0]];
        let out = pairwise_adversarial_loss(&a.view(), &b.view(), &disc).unwrap();
        assert!(out.value < 0.0 && out.value > -1e-6, "{}", out.value);
    }

    #[test]
    fn identical_inputs_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let disc = Discriminator::new(3, 4, &mut rng);
            let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-2.0..2.0));
            let out = pairwise_adversarial_loss(&x.view(), &x.view(), &disc).unwrap();
            // log p + log(1 − p) ≤ 2 log ½ pointwise
            assert!(out.value <= 2.0 * 0.5f64.ln() + 1e-12);
        }
    }
}
