use ndarray::{Array2, ArrayView2};

use super::DistanceOutput;
use crate::error::{Error, Result};

/// All unordered pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn unordered_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOutput {
    pub value: f64,
    /// Gradient with respect to each input batch.
    pub grads: Vec<Array2<f64>>,
}

/// Mean of `loss_fn` over all `K(K−1)/2` unordered pairs of batches.
///
/// `loss_fn` receives the pair index (position in [`unordered_pairs`]) and
/// the two batches.
pub fn pairwise_average<F>(batches: &[ArrayView2<f64>], mut loss_fn: F) -> Result<PairwiseOutput>
where
    F: FnMut(usize, &ArrayView2<f64>, &ArrayView2<f64>) -> Result<DistanceOutput>,
{
    if batches.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pairwise average needs at least 2 batches, got {}",
            batches.len()
        )));
    }
    let pairs = unordered_pairs(batches.len());
    let scale = 1.0 / pairs.len() as f64;
    let mut grads: Vec<Array2<f64>> = batches.iter().map(|b| Array2::zeros(b.raw_dim())).collect();
    let mut value = 0.0;
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let out = loss_fn(p, &batches[i], &batches[j])?;
        value += out.value;
        grads[i].scaled_add(scale, &out.grad_a);
        grads[j].scaled_add(scale, &out.grad_b);
    }
    Ok(PairwiseOutput {
        value: value * scale,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::{coral_loss, mmd_squared, KernelSpec};
    use ndarray::array;

    fn constant(v: f64, a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> DistanceOutput {
        DistanceOutput {
            value: v,
            grad_a: Array2::zeros(a.raw_dim()),
            grad_b: Array2::zeros(b.raw_dim()),
        }
    }

    #[test]
    fn pair_order() {
        assert_eq!(unordered_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(unordered_pairs(4).len(), 6);
    }

    #[test]
    fn three_pairs_average() {
        let x = array![[0.0]];
        let batches = vec![x.view(), x.view(), x.view()];
        let vals = [0.1, 0.2, 0.3];
        let out = pairwise_average(&batches, |p, a, b| Ok(constant(vals[p], a, b))).unwrap();
        assert!((out.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_batches_is_the_single_pair() {
        let a = array![[0.0, 1.0], [1.0, 0.5]];
        let b = array![[2.0, 1.0], [0.0, 0.0], [1.0, 1.0]];
        let spec = KernelSpec::fixed(1.0);
        let direct = mmd_squared(&a.view(), &b.view(), &spec).unwrap();
        let avg = pairwise_average(&[a.view(), b.view()], |_, x, y| mmd_squared(x, y, &spec)).unwrap();
        assert_eq!(avg.value, direct.value);
        assert_eq!(avg.grads[0], direct.grad_a);
        assert_eq!(avg.grads[1], direct.grad_b);
    }

    #[test]
    fn identical_batches_are_zero() {
        let a = array![[0.0, 1.0], [1.0, 0.5], [3.0, -1.0]];
        let batches = vec![a.view(), a.view(), a.view(), a.view()];
        let spec = KernelSpec::default();
        let m = pairwise_average(&batches, |_, x, y| mmd_squared(x, y, &spec)).unwrap();
        assert!(m.value.abs() < 1e-12);
        let c = pairwise_average(&batches, |_, x, y| coral_loss(x, y)).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn one_batch_errors() {
        let a = array![[0.0]];
        assert!(pairwise_average(&[a.view()], |_, x, y| Ok(constant(0.0, x, y))).is_err());
    }
}
