use serde::{Deserialize, Serialize};

use crate::distances::{DistanceKind, KernelSpec};
use crate::error::{Error, Result};

/// Which objective to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Classification plus the weighted domain-specific and alignment losses.
    #[default]
    Fused,
    /// Classification only; the auxiliary losses are neither computed nor
    /// applied.
    Erm,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fused" | "full" => Ok(Baseline::Fused),
            "erm" => Ok(Baseline::Erm),
            other => Err(Error::Config(format!("unknown baseline `{other}` (expected fused or erm)"))),
        }
    }
}

/// Quantity monitored for early stopping and model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    WeightedF1,
    /// Negative mean classification loss on the validation split.
    ValLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Total windows per step, split evenly across the training domains.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub distance: DistanceKind,
    pub kernel: KernelSpec,
    pub seed: u64,
    pub baseline: Baseline,
    /// Fuse with the one-hot true domain during training instead of the
    /// predicted weights.
    pub fusion_teacher: bool,
    pub selection: Selection,
    /// Hidden width of each pairwise discriminator (adversarial alignment).
    pub discriminator_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            beta: 1.0,
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 128,
            max_epochs: 500,
            patience: 30,
            distance: DistanceKind::Mmd,
            kernel: KernelSpec::default(),
            seed: 0,
            baseline: Baseline::Fused,
            fusion_teacher: false,
            selection: Selection::WeightedF1,
            discriminator_hidden: 64,
        }
    }
}

impl TrainConfig {
    /// Windows drawn from each domain per step.
    pub fn per_domain_batch(&self, num_domains: usize) -> usize {
        self.batch_size / num_domains.max(1)
    }

    /// `λ` and `β` actually applied: both zero for the ERM baseline.
    pub fn effective_weights(&self) -> (f64, f64) {
        match self.baseline {
            Baseline::Fused => (self.lambda, self.beta),
            Baseline::Erm => (0.0, 0.0),
        }
    }

    pub fn validate(&self, num_domains: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a finite value ≥ 0, got {v}"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate must be ≥ 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be at least 1".into());
        }
        let per = self.per_domain_batch(num_domains);
        if per == 0 {
            return bad(format!(
                "batch size {} is smaller than the number of domains {num_domains}",
                self.batch_size
            ));
        }
        if per < 2 && self.baseline == Baseline::Fused {
            return bad(format!("per-domain batch of {per} is too small for the alignment loss"));
        }
        if self.distance == DistanceKind::Adversarial && self.discriminator_hidden == 0 {
            return bad("discriminator_hidden must be at least 1".into());
        }
        self.kernel.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.max_epochs, c.patience), (128, 500, 30));
        assert_eq!(c.per_domain_batch(4), 32);
        assert_eq!(c.per_domain_batch(3), 42);
        c.validate(4).unwrap();
        assert!(TrainConfig { lambda: -1.0, ..c.clone() }.validate(4).is_err());
        assert!(TrainConfig { batch_size: 3, ..c.clone() }.validate(4).is_err());
        assert!(TrainConfig { momentum: 1.0, ..c.clone() }.validate(4).is_err());
        assert_eq!(TrainConfig { baseline: Baseline::Erm, ..c }.effective_weights(), (0.0, 0.0));
        assert_eq!("ERM".parse::<Baseline>().unwrap(), Baseline::Erm);
        assert_eq!("fused".parse::<Baseline>().unwrap(), Baseline::Fused);
        assert!("other".parse::<Baseline>().is_err());
    }
}
