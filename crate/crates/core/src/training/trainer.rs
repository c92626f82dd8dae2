use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::losses::classification_loss;
use super::sgd::{sgd_update, Sgd};
use super::step::{standardize, total_loss, Batch, LossBreakdown};
use super::{Selection, TrainConfig};
use crate::data::{DgTask, NormStats, SensorWindow};
use crate::distances::{unordered_pairs, DistanceKind, Discriminator};
use crate::error::{Error, Result};
use crate::evaluation::weighted_f1;
use crate::network::{forward, stack_windows, Fusion, Mode, ModelConfig, ModelParams};

/// Windows per forward call during inference.
const INFER_CHUNK: usize = 256;

const INIT_STREAM: u64 = 0;
const DISCRIMINATOR_STREAM: u64 = 1;
const SAMPLING_STREAM: u64 = 2;

/// One epoch of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_cls: f64,
    pub l_dsr: f64,
    pub l_dir: f64,
    pub total: f64,
    pub val_weighted_f1: f64,
    /// The monitored value (equal to `val_weighted_f1` unless selecting on
    /// validation loss).
    pub val_score: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_score: f64,
    pub stop_reason: StopReason,
    /// Losses of the very first step, before any update.
    pub initial: LossBreakdown,
    pub steps_per_epoch: usize,
}

impl TrainLog {
    /// One JSON record per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Vec<EpochRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Other(format!("train log line {}: {e}", i + 1)))
            })
            .collect()
    }

    /// Equality of everything except wall-clock times.
    pub fn same_numbers(&self, other: &TrainLog) -> bool {
        let strip = |log: &TrainLog| -> TrainLog {
            let mut log = log.clone();
            log.epochs.iter_mut().for_each(|r| r.seconds = 0.0);
            log
        };
        strip(self) == strip(other)
    }
}

/// Validation result for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub weighted_f1: f64,
    /// Larger is better.
    pub score: f64,
}

/// Copies `base` with the input shape, domain count and class count of
/// `task`.
pub fn model_config_for(task: &DgTask, base: &ModelConfig) -> ModelConfig {
    let (channels, timesteps) = task.shape();
    ModelConfig {
        channels,
        timesteps,
        num_domains: task.num_domains(),
        num_classes: task.num_classes,
        ..base.clone()
    }
}

fn check_model(task: &DgTask, model: &ModelConfig) -> Result<()> {
    let expected = model_config_for(task, model);
    if &expected != model {
        return Err(Error::ConfigMismatch(format!(
            "model expects {}×{} inputs, {} domains, {} classes; task has {}×{}, {}, {}",
            model.channels,
            model.timesteps,
            model.num_domains,
            model.num_classes,
            expected.channels,
            expected.timesteps,
            expected.num_domains,
            expected.num_classes
        )));
    }
    model.validate()
}

/// Weighted F1 (and the selection score) on the pooled validation split.
pub fn validate_on(params: &ModelParams, task: &DgTask, selection: Selection) -> Result<Validation> {
    let windows: Vec<&SensorWindow> = task.val_domains.iter().flat_map(|d| &d.windows).collect();
    let out = infer_with_stats(params, &windows, Some(&task.stats))?;
    let truth: Vec<usize> = windows.iter().map(|w| w.activity as usize).collect();
    let f1 = weighted_f1(&truth, &out.predictions, params.config.num_classes)?;
    let score = match selection {
        Selection::WeightedF1 => f1,
        Selection::ValLoss => -classification_loss(&out.probs.view(), &truth)?.value,
    };
    Ok(Validation { weighted_f1: f1, score })
}

/// Trains with early stopping on the task's validation split.
pub fn train(task: &DgTask, model: &ModelConfig, config: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    train_with(task, model, config, |p| validate_on(p, task, config.selection))
}

/// Per-domain index streams that reshuffle whenever they run out.
struct DomainSampler {
    order: Vec<Vec<usize>>,
    cursor: Vec<usize>,
    rng: ChaCha8Rng,
}

impl DomainSampler {
    fn new(sizes: &[usize], rng: ChaCha8Rng) -> Self {
        let mut s = DomainSampler {
            order: sizes.iter().map(|&n| (0..n).collect()).collect(),
            cursor: vec![0; sizes.len()],
            rng,
        };
        for o in &mut s.order {
            o.shuffle(&mut s.rng);
        }
        s
    }

    fn take(&mut self, k: usize, count: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if self.cursor[k] == self.order[k].len() {
                self.order[k].shuffle(&mut self.rng);
                self.cursor[k] = 0;
            }
            out.push(self.order[k][self.cursor[k]]);
            self.cursor[k] += 1;
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// [`train`] with a caller-supplied validator, called once per epoch.
pub fn train_with<V>(
    task: &DgTask,
    model: &ModelConfig,
    config: &TrainConfig,
    mut validator: V,
) -> Result<(ModelParams, TrainLog)>
where
    V: FnMut(&ModelParams) -> Result<Validation>,
{
    task.validate()?;
    check_model(task, model)?;
    let k = task.num_domains();
    config.validate(k)?;
    let per = config.per_domain_batch(k);
    let sizes: Vec<usize> = task.train_domains.iter().map(|d| d.len()).collect();
    let steps_per_epoch = (sizes.iter().copied().max().unwrap_or(0) / per).max(1);

    let mut init_rng = stream_rng(config.seed, INIT_STREAM);
    let mut params = ModelParams::init(model, rand::Rng::random(&mut init_rng))?;
    let mut opt = Sgd::new(config.learning_rate, config.momentum);
    let adversarial = config.distance == DistanceKind::Adversarial;
    let mut disc_rng = stream_rng(config.seed, DISCRIMINATOR_STREAM);
    let mut discriminators: Vec<Discriminator> = if adversarial {
        unordered_pairs(k)
            .iter()
            .map(|_| Discriminator::new(model.branch_width, config.discriminator_hidden, &mut disc_rng))
            .collect()
    } else {
        Vec::new()
    };
    let mut disc_velocity: Vec<Discriminator> = discriminators.iter().map(|d| d.zeros_like()).collect();
    let mut sampler = DomainSampler::new(&sizes, stream_rng(config.seed, SAMPLING_STREAM));

    let mut epochs = Vec::new();
    let mut best: Option<(ModelParams, usize, f64)> = None;
    let mut since_best = 0;
    let mut initial = None;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut step_index = 0;
    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let mut sum = LossBreakdown::default();
        for _ in 0..steps_per_epoch {
            let mut windows = Vec::with_capacity(per * k);
            for (d, domain) in task.train_domains.iter().enumerate() {
                windows.extend(sampler.take(d, per).into_iter().map(|i| &domain.windows[i]));
            }
            let batch = Batch::from_windows(windows, Some(&task.stats))?;
            let out = total_loss(&batch, &params, config, &discriminators)?;
            if !out.losses.is_finite() {
                return Err(Error::Diverged {
                    step: step_index,
                    losses: format!("{:?}", out.losses),
                });
            }
            initial.get_or_insert(out.losses);
            opt.step(&mut params, &out.grads)?;
            for ((disc, vel), grad) in discriminators.iter_mut().zip(&mut disc_velocity).zip(&out.discriminator_grads) {
                for ((p, v), g) in disc.blocks_mut().into_iter().zip(vel.blocks_mut()).zip(grad.blocks()) {
                    // the discriminator ascends the alignment value
                    let ascent: Vec<f64> = g.iter().map(|x| -x).collect();
                    sgd_update(p, v, &ascent, config.learning_rate, config.momentum);
                }
            }
            sum.l_cls += out.losses.l_cls;
            sum.l_dsr += out.losses.l_dsr;
            sum.l_dir += out.losses.l_dir;
            sum.total += out.losses.total;
            step_index += 1;
        }
        let val = validator(&params)?;
        let steps = steps_per_epoch as f64;
        epochs.push(EpochRecord {
            epoch,
            l_cls: sum.l_cls / steps,
            l_dsr: sum.l_dsr / steps,
            l_dir: sum.l_dir / steps,
            total: sum.total / steps,
            val_weighted_f1: val.weighted_f1,
            val_score: val.score,
            seconds: start.elapsed().as_secs_f64(),
        });
        tracing::debug!(epoch, total = sum.total / steps, val = val.score, "epoch finished");
        if best.as_ref().map_or(true, |b| val.score > b.2) {
            best = Some((params.clone(), epoch, val.score));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }
    let (best_params, best_epoch, best_score) = best.expect("at least one epoch");
    Ok((
        best_params,
        TrainLog {
            epochs,
            best_epoch,
            best_score,
            stop_reason,
            initial: initial.expect("at least one step"),
            steps_per_epoch,
        },
    ))
}

/// Predictions for a set of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Arg-max class per window; ties go to the lowest class index.
    pub predictions: Vec<usize>,
    /// `N × C` class probabilities.
    pub probs: Array2<f64>,
    /// `N × K` fusion weights.
    pub weights: Array2<f64>,
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Classifies already standardized windows.
pub fn infer(params: &ModelParams, windows: &[SensorWindow]) -> Result<Inference> {
    let refs: Vec<&SensorWindow> = windows.iter().collect();
    infer_with_stats(params, &refs, None)
}

/// Classifies raw windows, standardizing each chunk with `stats` first.
pub fn infer_with_stats(
    params: &ModelParams,
    windows: &[&SensorWindow],
    stats: Option<&NormStats>,
) -> Result<Inference> {
    let cfg = &params.config;
    if windows.is_empty() {
        return Ok(Inference {
            predictions: Vec::new(),
            probs: Array2::zeros((0, cfg.num_classes)),
            weights: Array2::zeros((0, cfg.num_domains)),
        });
    }
    let chunks: Vec<(Array2<f64>, Array2<f64>)> = windows
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let mut x = stack_windows(chunk.iter().copied())?;
            if let Some(stats) = stats {
                standardize(&mut x, stats)?;
            }
            let t = forward(&x.view(), params, Mode::Infer, Fusion::Predicted)?;
            Ok((t.probs, t.weights))
        })
        .collect::<Result<_>>()?;
    let probs = concatenate(Axis(0), &chunks.iter().map(|c| c.0.view()).collect::<Vec<_>>()).expect("same width");
    let weights = concatenate(Axis(0), &chunks.iter().map(|c| c.1.view()).collect::<Vec<_>>()).expect("same width");
    let predictions = probs.rows().into_iter().map(argmax).collect();
    Ok(Inference {
        predictions,
        probs,
        weights,
    })
}
