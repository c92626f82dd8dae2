use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::check_batches;
use crate::error::{Error, Result};

/// Multipliers applied to the median pairwise distance.
pub const MEDIAN_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Gaussian kernel averaged over a set of bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Fixed bandwidths.
    Gaussian { bandwidths: Vec<f64> },
    /// Bandwidths are `multiplier × median pairwise distance` of the pooled
    /// batches, recomputed per call and treated as constants.
    MedianHeuristic { multipliers: Vec<f64> },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::MedianHeuristic {
            multipliers: MEDIAN_MULTIPLIERS.to_vec(),
        }
    }
}

impl KernelSpec {
    pub fn fixed(sigma: f64) -> Self {
        KernelSpec::Gaussian {
            bandwidths: vec![sigma],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = match self {
            KernelSpec::Gaussian { bandwidths } => bandwidths,
            KernelSpec::MedianHeuristic { multipliers } => multipliers,
        };
        if vals.is_empty() || vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidths must be positive and non-empty: {vals:?}"
            )));
        }
        Ok(())
    }

    /// Concrete bandwidths for the pair `(a, b)`.
    pub fn bandwidths(&self, a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self {
            KernelSpec::Gaussian { bandwidths } => bandwidths.clone(),
            KernelSpec::MedianHeuristic { multipliers } => {
                let base = median_pairwise_distance(a, b);
                let base = if base > 1e-12 { base } else { 1.0 };
                multipliers.iter().map(|m| m * base).collect()
            }
        })
    }
}

/// Median Euclidean distance over all distinct pairs of rows of `a` ∪ `b`.
pub fn median_pairwise_distance(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let rows: Vec<_> = a.rows().into_iter().chain(b.rows()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let s: f64 = rows[i].iter().zip(rows[j].iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            d.push(s.sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

pub(crate) fn squared_distances(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    for (p, ra) in a.rows().into_iter().enumerate() {
        for (q, rb) in b.rows().into_iter().enumerate() {
            out[[p, q]] = ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        }
    }
    out
}

/// Kernel matrix and the matrix of `Σ_σ k_σ / σ²` (averaged), which is the
/// factor in `∂k(x, y)/∂x = −g · (x − y)`.
pub(crate) fn kernel_and_slope(
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    sigmas: &[f64],
) -> (Array2<f64>, Array2<f64>) {
    let d2 = squared_distances(a, b);
    let s = sigmas.len() as f64;
    let mut k = Array2::zeros(d2.dim());
    let mut g = Array2::zeros(d2.dim());
    for ((kk, gg), &d) in k.iter_mut().zip(g.iter_mut()).zip(d2.iter()) {
        let (mut ks, mut gs) = (0.0, 0.0);
        for &sigma in sigmas {
            let v2 = sigma * sigma;
            let e = (-d / (2.0 * v2)).exp();
            ks += e;
            gs += e / v2;
        }
        *kk = ks / s;
        *gg = gs / s;
    }
    (k, g)
}

/// `n_A × n_B` Gaussian kernel matrix, averaged over the spec's bandwidths.
pub fn gaussian_kernel_matrix(
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    spec: &KernelSpec,
) -> Result<Array2<f64>> {
    check_batches(a, b, "gaussian_kernel_matrix")?;
    let sigmas = spec.bandwidths(a, b)?;
    Ok(kernel_and_slope(a, b, &sigmas).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_points_give_one() {
        let a = array![[0.3, -1.0], [2.0, 5.0]];
        let k = gaussian_kernel_matrix(&a.view(), &a.view(), &KernelSpec::default()).unwrap();
        assert!((k[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((k[[1, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_distance_unit_bandwidth() {
        let a = array![[0.0]];
        let b = array![[1.0]];
        let k = gaussian_kernel_matrix(&a.view(), &b.view(), &KernelSpec::fixed(1.0)).unwrap();
        assert!((k[[0, 0]] - 0.60653).abs() < 1e-5);
        assert_eq!(k[[0, 0]], (-0.5f64).exp());
    }

    #[test]
    fn transpose_symmetry() {
        let a = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let b = array![[1.0, 1.0], [3.0, 0.0]];
        let spec = KernelSpec::default();
        let ab = gaussian_kernel_matrix(&a.view(), &b.view(), &spec).unwrap();
        let ba = gaussian_kernel_matrix(&b.view(), &a.view(), &spec).unwrap();
        assert_eq!(ab.t(), ba);
    }

    #[test]
    fn dimension_mismatch() {
        let a = array![[0.0, 1.0]];
        let b = array![[1.0]];
        assert!(gaussian_kernel_matrix(&a.view(), &b.view(), &KernelSpec::fixed(1.0)).is_err());
    }

    #[test]
    fn median_of_pairs() {
        let a = array![[0.0], [1.0]];
        let b = array![[3.0]];
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&a.view(), &b.view()), 2.0);
        let spec = KernelSpec::default();
        assert_eq!(spec.bandwidths(&a.view(), &b.view()).unwrap(), vec![0.5, 1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn invalid_bandwidths() {
        assert!(KernelSpec::fixed(0.0).validate().is_err());
        assert!(KernelSpec::Gaussian { bandwidths: vec![] }.validate().is_err());
    }
}
