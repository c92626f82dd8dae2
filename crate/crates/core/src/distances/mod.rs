//! Distribution distances between batches of features, each returning its
//! value together with exact gradients with respect to both input batches.
//!
//! Batches are `n × d` matrices, one sample per row.

mod adversarial;
mod coral;
mod kernel;
mod mmd;
mod pairwise;

pub use adversarial::{pairwise_adversarial_loss, AdversarialOutput, Discriminator, PROB_CLAMP};
pub use coral::{coral_loss, covariance};
pub use kernel::{gaussian_kernel_matrix, median_pairwise_distance, KernelSpec, MEDIAN_MULTIPLIERS};
pub use mmd::mmd_squared;
pub use pairwise::{pairwise_average, unordered_pairs, PairwiseOutput};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of a two-batch distance and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOutput {
    pub value: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
}

/// Which distance drives the domain-invariant objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    Mmd,
    Coral,
    Adversarial,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::Mmd, DistanceKind::Coral, DistanceKind::Adversarial];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Mmd => "mmd",
            DistanceKind::Coral => "coral",
            DistanceKind::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmd" => Ok(DistanceKind::Mmd),
            "coral" => Ok(DistanceKind::Coral),
            "adversarial" | "dann" => Ok(DistanceKind::Adversarial),
            other => Err(Error::InvalidArgument(format!("unknown distance kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn check_batches(a: &ArrayView2<f64>, b: &ArrayView2<f64>, what: &'static str) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::shape(
            what,
            format!("feature dimensions differ: {} vs {}", a.ncols(), b.ncols()),
        ));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::shape(what, "empty batch"));
    }
    Ok(())
}
