use ndarray::{Array2, ArrayView2, Axis};

use crate::distances::{
    coral_loss, mmd_squared, pairwise_adversarial_loss, pairwise_average, unordered_pairs, DistanceKind,
    DistanceOutput, Discriminator, KernelSpec,
};
use crate::error::{Error, Result};
use crate::network::layers::softmax;

/// Probabilities are clamped here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// A scalar loss and its gradient with respect to the loss input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// Mean cross-entropy of class probabilities against integer labels.
pub fn classification_loss(probs: &ArrayView2<f64>, labels: &[usize]) -> Result<LossGrad> {
    let (n, c) = probs.dim();
    if n != labels.len() || n == 0 {
        return Err(Error::InvalidArgument(format!("{n} probability rows but {} labels", labels.len())));
    }
    let mut grad = Array2::zeros((n, c));
    let mut value = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
        }
        let p = probs[[i, y]].max(PROB_FLOOR);
        value -= p.ln();
        grad[[i, y]] = -1.0 / (p * n as f64);
    }
    Ok(LossGrad {
        value: value / n as f64,
        grad,
    })
}

/// Cross-entropy of the domain classifier, averaged within each domain and
/// then across the domains present in the batch.
pub fn domain_specific_loss(domain_logits: &ArrayView2<f64>, domains: &[usize]) -> Result<LossGrad> {
    let (n, k) = domain_logits.dim();
    if n != domains.len() || n == 0 {
        return Err(Error::InvalidArgument(format!("{n} domain logit rows but {} labels", domains.len())));
    }
    let mut counts = vec![0usize; k];
    for &d in domains {
        if d >= k {
            return Err(Error::InvalidArgument(format!(
                "training sample with domain {d} outside 0..{k} (unknown domains cannot train the domain classifier)"
            )));
        }
        counts[d] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let probs = softmax(domain_logits);
    let mut per_domain = vec![0.0; k];
    let mut grad = probs.clone();
    for (i, &d) in domains.iter().enumerate() {
        let row = domain_logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        per_domain[d] += lse - row[d];
        grad[[i, d]] -= 1.0;
        let scale = 1.0 / (counts[d] as f64 * present);
        grad.row_mut(i).mapv_inplace(|g| g * scale);
    }
    let value = per_domain
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(l, &c)| l / c as f64)
        .sum::<f64>()
        / present;
    Ok(LossGrad { value, grad })
}

/// The alignment loss averaged over all domain pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantLoss {
    pub value: f64,
    /// Gradient with respect to each domain's feature batch.
    pub grads: Vec<Array2<f64>>,
    /// Gradient with respect to each pair's discriminator (adversarial only),
    /// already scaled by the pair average.
    pub discriminator_grads: Vec<Discriminator>,
}

/// Pairwise alignment between per-domain feature batches.
///
/// `discriminators` must hold one discriminator per unordered pair (in
/// [`unordered_pairs`] order) when `kind` is adversarial and is ignored
/// otherwise.
pub fn domain_invariant_loss(
    batches: &[ArrayView2<f64>],
    kind: DistanceKind,
    kernel: &KernelSpec,
    discriminators: &[Discriminator],
) -> Result<InvariantLoss> {
    let pairs = unordered_pairs(batches.len());
    let mut discriminator_grads = Vec::new();
    if kind == DistanceKind::Adversarial && discriminators.len() != pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} discriminators for {} domain pairs",
            discriminators.len(),
            pairs.len()
        )));
    }
    let out = pairwise_average(batches, |p, a, b| match kind {
        DistanceKind::Mmd => mmd_squared(a, b, kernel),
        DistanceKind::Coral => coral_loss(a, b),
        DistanceKind::Adversarial => {
            let out = pairwise_adversarial_loss(a, b, &discriminators[p])?;
            discriminator_grads.push(out.grad_disc);
            Ok(DistanceOutput {
                value: out.value,
                grad_a: out.grad_a,
                grad_b: out.grad_b,
            })
        }
    })?;
    let scale = 1.0 / pairs.len().max(1) as f64;
    for g in &mut discriminator_grads {
        for block in g.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(InvariantLoss {
        value: out.value,
        grads: out.grads,
        discriminator_grads,
    })
}

/// Rows of `m` grouped by their domain label, as index lists per domain.
pub(crate) fn rows_by_domain(domains: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); k];
    for (i, &d) in domains.iter().enumerate() {
        rows[d].push(i);
    }
    rows
}

/// Scatters per-domain row gradients back into a full `N × d` matrix.
pub(crate) fn scatter_rows(grads: &[Array2<f64>], rows: &[Vec<usize>], n: usize, d: usize) -> Vec<Array2<f64>> {
    grads
        .iter()
        .zip(rows)
        .map(|(g, r)| {
            let mut full = Array2::zeros((n, d));
            for (src, &dst) in r.iter().enumerate() {
                full.row_mut(dst).assign(&g.index_axis(Axis(0), src));
            }
            full
        })
        .collect()
}
