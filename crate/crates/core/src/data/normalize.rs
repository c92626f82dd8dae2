use serde::{Deserialize, Serialize};

use super::{DomainDataset, SensorWindow};
use crate::error::{Error, Result};

/// Smallest standard deviation used when scaling a channel.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel mean and standard deviation of the training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform for `channels` channels.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }
}

/// Pools every timestep of every training window and computes per-channel
/// population statistics. The standard deviation is floored at [`STD_FLOOR`].
pub fn fit_normalizer(train: &[DomainDataset]) -> Result<NormStats> {
    let first = train
        .iter()
        .find_map(|d| d.windows.first())
        .ok_or_else(|| Error::InvalidArgument("cannot fit a normalizer on no data".into()))?;
    let channels = first.channels();
    let mut count = 0usize;
    let mut mean = vec![0.0; channels];
    for w in train.iter().flat_map(|d| &d.windows) {
        if w.channels() != channels {
            return Err(Error::shape("fit_normalizer", "windows disagree on channel count"));
        }
        for (c, row) in w.values.rows().into_iter().enumerate() {
            mean[c] += row.sum();
        }
        count += w.timesteps();
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    // second pass keeps the variance accurate for large offsets
    let mut var = vec![0.0; channels];
    for w in train.iter().flat_map(|d| &d.windows) {
        for (c, row) in w.values.rows().into_iter().enumerate() {
            var[c] += row.iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

fn check_channels(w: &SensorWindow, stats: &NormStats) -> Result<()> {
    if w.channels() != stats.channels() {
        return Err(Error::shape(
            "normalize",
            format!(
                "window has {} channels, statistics have {}",
                w.channels(),
                stats.channels()
            ),
        ));
    }
    Ok(())
}

/// Standardizes every channel as `(x − mean) / std`. Labels are untouched.
pub fn normalize(w: &SensorWindow, stats: &NormStats) -> Result<SensorWindow> {
    check_channels(w, stats)?;
    let mut out = w.clone();
    for (c, mut row) in out.values.rows_mut().into_iter().enumerate() {
        let (m, s) = (stats.mean[c], stats.std[c]);
        row.mapv_inplace(|v| (v - m) / s);
    }
    Ok(out)
}

/// Inverse of [`normalize`].
pub fn denormalize(w: &SensorWindow, stats: &NormStats) -> Result<SensorWindow> {
    check_channels(w, stats)?;
    let mut out = w.clone();
    for (c, mut row) in out.values.rows_mut().into_iter().enumerate() {
        let (m, s) = (stats.mean[c], stats.std[c]);
        row.mapv_inplace(|v| v * s + m);
    }
    Ok(out)
}
