use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the fused network.
///
/// The input window is treated as a `1 × channels × timesteps` image; both
/// convolutions use `(1, k)` kernels along time, each followed by ReLU and
/// non-overlapping max pooling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    pub timesteps: usize,
    pub num_domains: usize,
    pub num_classes: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub pool: usize,
    pub branch_width: usize,
    pub domain_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 45,
            timesteps: 125,
            num_domains: 3,
            num_classes: 19,
            conv1_filters: 16,
            conv1_kernel: 6,
            conv2_filters: 32,
            conv2_kernel: 9,
            pool: 2,
            branch_width: 128,
            domain_hidden: 64,
        }
    }
}

impl ModelConfig {
    pub fn conv1_len(&self) -> usize {
        (self.timesteps + 1).saturating_sub(self.conv1_kernel)
    }

    pub fn pool1_len(&self) -> usize {
        self.conv1_len() / self.pool.max(1)
    }

    pub fn conv2_len(&self) -> usize {
        (self.pool1_len() + 1).saturating_sub(self.conv2_kernel)
    }

    pub fn pool2_len(&self) -> usize {
        self.conv2_len() / self.pool.max(1)
    }

    /// Length of the shared feature vector.
    pub fn feature_len(&self) -> usize {
        self.conv2_filters * self.channels * self.pool2_len()
    }

    pub fn param_count(&self) -> usize {
        let f = self.feature_len();
        let k = self.num_domains;
        self.conv1_filters * self.conv1_kernel
            + self.conv1_filters
            + self.conv2_filters * self.conv1_filters * self.conv2_kernel
            + self.conv2_filters
            + k * (f * self.branch_width + self.branch_width)
            + f * self.domain_hidden
            + self.domain_hidden
            + self.domain_hidden * k
            + k
            + self.branch_width * self.num_classes
            + self.num_classes
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("channels", self.channels),
            ("timesteps", self.timesteps),
            ("conv1_filters", self.conv1_filters),
            ("conv1_kernel", self.conv1_kernel),
            ("conv2_filters", self.conv2_filters),
            ("conv2_kernel", self.conv2_kernel),
            ("pool", self.pool),
            ("branch_width", self.branch_width),
            ("domain_hidden", self.domain_hidden),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.num_domains < 2 {
            return Err(Error::Config(format!("num_domains must be at least 2, got {}", self.num_domains)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be at least 2, got {}", self.num_classes)));
        }
        if self.conv1_kernel > self.timesteps {
            return Err(Error::Config("conv1_kernel exceeds timesteps".into()));
        }
        if self.pool1_len() < self.conv2_kernel || self.pool2_len() == 0 {
            return Err(Error::Config(format!(
                "timesteps {} too short for kernels ({}, {}) with pool {}",
                self.timesteps, self.conv1_kernel, self.conv2_kernel, self.pool
            )));
        }
        Ok(())
    }
}
