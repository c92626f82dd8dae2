use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::losses::{classification_loss, domain_invariant_loss, domain_specific_loss, rows_by_domain, scatter_rows};
use super::{Baseline, TrainConfig};
use crate::data::{NormStats, SensorWindow};
use crate::distances::Discriminator;
use crate::error::{Error, Result};
use crate::network::{backward, forward, one_hot, select_rows, stack_windows, Fusion, Mode, ModelParams, Upstream};

/// The loss components of one step and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_cls: f64,
    pub l_dsr: f64,
    pub l_dir: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l_cls: f64, l_dsr: f64, l_dir: f64, lambda: f64, beta: f64) -> Self {
        LossBreakdown {
            l_cls,
            l_dsr,
            l_dir,
            total: l_cls + lambda * l_dsr + beta * l_dir,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_cls.is_finite() && self.l_dsr.is_finite() && self.l_dir.is_finite() && self.total.is_finite()
    }
}

/// A labelled mini-batch. Every sample carries its training-domain index.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `N × channels × timesteps`.
    pub x: Array3<f64>,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
}

impl Batch {
    /// Stacks windows, optionally standardizing them on the way.
    pub fn from_windows<'a, I>(windows: I, stats: Option<&NormStats>) -> Result<Batch>
    where
        I: IntoIterator<Item = &'a SensorWindow>,
    {
        let windows: Vec<&SensorWindow> = windows.into_iter().collect();
        let mut x = stack_windows(windows.iter().copied())?;
        if let Some(stats) = stats {
            standardize(&mut x, stats)?;
        }
        let mut domains = Vec::with_capacity(windows.len());
        for w in &windows {
            match w.domain {
                Some(d) => domains.push(d as usize),
                None => return Err(Error::InvalidArgument("training window without a domain label".into())),
            }
        }
        Ok(Batch {
            x,
            labels: windows.iter().map(|w| w.activity as usize).collect(),
            domains,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `(x − mean) / std` per channel of an `N × C × T` batch.
pub fn standardize(x: &mut Array3<f64>, stats: &NormStats) -> Result<()> {
    if x.dim().1 != stats.channels() {
        return Err(Error::shape(
            "standardize",
            format!("{} channels but statistics for {}", x.dim().1, stats.channels()),
        ));
    }
    for (c, mut lane) in x.axis_iter_mut(Axis(1)).enumerate() {
        let (m, s) = (stats.mean[c], stats.std[c]);
        lane.mapv_inplace(|v| (v - m) / s);
    }
    Ok(())
}

/// Losses and gradients of one step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub losses: LossBreakdown,
    pub grads: ModelParams,
    /// Gradients of the alignment value for each pairwise discriminator;
    /// empty unless the adversarial alignment is active.
    pub discriminator_grads: Vec<Discriminator>,
}

/// One forward and one backward pass over the whole batch.
///
/// The ERM baseline skips the domain-specific and alignment terms entirely.
/// Otherwise both are computed, and each contributes gradient only when its
/// weight is positive.
pub fn total_loss(
    batch: &Batch,
    params: &ModelParams,
    config: &TrainConfig,
    discriminators: &[Discriminator],
) -> Result<StepOutput> {
    let k = params.config.num_domains;
    let n = batch.len();
    if batch.domains.len() != n {
        return Err(Error::InvalidArgument("every sample needs a domain label".into()));
    }
    if let Some(&d) = batch.domains.iter().find(|&&d| d >= k) {
        return Err(Error::InvalidArgument(format!("sample domain {d} outside the {k} training domains")));
    }
    let (lambda, beta) = config.effective_weights();
    let full = config.baseline == Baseline::Fused;
    let teacher = (full && config.fusion_teacher).then(|| one_hot(&batch.domains, k));
    let fusion = match &teacher {
        Some(w) => Fusion::Fixed(w.view()),
        None => Fusion::Predicted,
    };
    let trace = forward(&batch.x.view(), params, Mode::Train, fusion)?;
    let cls = classification_loss(&trace.probs.view(), &batch.labels)?;
    let mut upstream = Upstream {
        probs: Some(cls.grad),
        ..Default::default()
    };
    let (mut l_dsr, mut l_dir) = (0.0, 0.0);
    let mut discriminator_grads = Vec::new();
    if full {
        let dsr = domain_specific_loss(&trace.domain_logits.view(), &batch.domains)?;
        l_dsr = dsr.value;
        if lambda > 0.0 {
            upstream.domain_logits = Some(dsr.grad * lambda);
        }
        let rows = rows_by_domain(&batch.domains, k);
        let feats: Vec<Array2<f64>> = rows
            .iter()
            .enumerate()
            .map(|(j, r)| select_rows(&trace.branch_features[j], r))
            .collect();
        let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
        let dir = domain_invariant_loss(&views, config.distance, &config.kernel, discriminators)?;
        l_dir = dir.value;
        if beta > 0.0 {
            let mut grads = scatter_rows(&dir.grads, &rows, n, params.config.branch_width);
            grads.iter_mut().for_each(|g| *g *= beta);
            upstream.branch_features = Some(grads);
            discriminator_grads = dir.discriminator_grads;
        }
    }
    let grads = backward(params, &trace, &upstream)?;
    Ok(StepOutput {
        losses: LossBreakdown::new(cls.value, l_dsr, l_dir, lambda, beta),
        grads,
        discriminator_grads,
    })
}
