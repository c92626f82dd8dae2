use crate::error::{Error, Result};
use crate::network::ModelParams;

/// `v ← momentum·v + g; p ← p − lr·v` on one flat block.
pub fn sgd_update(p: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, momentum: f64) {
    for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

/// SGD with momentum over every parameter group of a model.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Option<ModelParams>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: None,
        }
    }

    /// Applies one update. A non-finite gradient aborts before anything is
    /// modified, naming the offending group.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        sgd_step(params, self.velocity.get_or_insert_with(|| params.zeros_like()), grads, self.lr, self.momentum)
    }
}

/// One momentum step with explicit velocity state.
pub fn sgd_step(
    params: &mut ModelParams,
    velocity: &mut ModelParams,
    grads: &ModelParams,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let g = grads.groups();
    for (name, block) in &g {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    let p = params.groups_mut();
    let v = velocity.groups_mut();
    if p.len() != g.len() || v.len() != g.len() || p.iter().zip(&g).any(|(a, b)| a.1.len() != b.1.len()) {
        return Err(Error::shape("sgd_step", "gradient layout does not match the parameters"));
    }
    for ((p, v), g) in p.into_iter().zip(v).zip(&g) {
        if v.1.len() != p.1.len() {
            return Err(Error::shape("sgd_step", format!("velocity for `{}` has the wrong size", p.0)));
        }
        sgd_update(p.1, v.1, g.1, lr, momentum);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            channels: 1,
            timesteps: 8,
            num_domains: 2,
            num_classes: 2,
            conv1_filters: 1,
            conv1_kernel: 2,
            conv2_filters: 1,
            conv2_kernel: 2,
            pool: 2,
            branch_width: 2,
            domain_hidden: 2,
        }
    }

    #[test]
    fn hand_updates() {
        let (mut p, mut v) = ([1.0], [0.0]);
        sgd_update(&mut p, &mut v, &[2.0], 0.1, 0.0);
        assert!((p[0] - 0.8).abs() < 1e-15);
        let (mut p, mut v) = ([0.0], [0.0]);
        sgd_update(&mut p, &mut v, &[1.0], 0.1, 0.9);
        assert!((p[0] + 0.1).abs() < 1e-15);
        sgd_update(&mut p, &mut v, &[1.0], 0.1, 0.9);
        assert!((p[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_identity() {
        let p0 = ModelParams::init(&tiny(), 3).unwrap();
        let mut p = p0.clone();
        let mut g = p0.zeros_like();
        g.add_scaled(1.0, &p0);
        let mut opt = Sgd::new(0.0, 0.9);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, p0);
    }

    #[test]
    fn non_finite_gradient_names_group() {
        let mut p = ModelParams::init(&tiny(), 3).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.domain_b1[1] = f64::NAN;
        let err = Sgd::new(0.1, 0.9).step(&mut p, &g).unwrap_err();
        assert!(err.to_string().contains("domain.hidden.bias"), "{err}");
        assert_eq!(p, before);
    }
}
