//! Windowed sensor data: the canonical in-memory types, the public dataset
//! importers, synthetic shifted-domain streams and the binary interchange
//! format that decouples importers from the trainer.

mod format;
mod normalize;
mod split;
mod synth;
mod task;
mod window;

pub mod dsads;
pub mod pamap2;
pub mod uschad;

pub use format::{read_window_file, write_window_file, Sidecar, WindowFile, WINDOW_MAGIC};
pub use normalize::{denormalize, fit_normalizer, normalize, NormStats, STD_FLOOR};
pub use split::split_train_val;
pub use synth::{generate_domains, generate_synthetic, DomainShift, SynthShiftSpec};
pub use task::DgTask;
pub use window::{window_stream, PURITY_PERCENT};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Domain value written for windows whose domain is not known (test data).
pub const UNKNOWN_DOMAIN: u16 = 0xFFFF;

/// One fixed-length multi-channel window.
///
/// `values` is `channels × timesteps`. `domain` is `None` for windows whose
/// domain label must not be used (held-out test data).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindow {
    pub values: Array2<f64>,
    pub activity: u16,
    pub domain: Option<u16>,
}

impl SensorWindow {
    pub fn new(values: Array2<f64>, activity: u16, domain: Option<u16>) -> Self {
        Self {
            values,
            activity,
            domain,
        }
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn timesteps(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// All windows recorded in one domain (a group of subjects).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub windows: Vec<SensorWindow>,
    pub domain_id: u16,
    pub name: String,
}

impl DomainDataset {
    /// Builds a dataset, checking it is non-empty, finite, shape-consistent
    /// and that every window belongs to `domain_id` (or is unlabeled).
    pub fn new(name: impl Into<String>, domain_id: u16, windows: Vec<SensorWindow>) -> Result<Self> {
        let name = name.into();
        let first = windows
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("domain `{name}` has no windows")))?;
        let shape = (first.channels(), first.timesteps());
        for (i, w) in windows.iter().enumerate() {
            if (w.channels(), w.timesteps()) != shape {
                return Err(Error::shape(
                    "DomainDataset",
                    format!(
                        "window {i} of `{name}` is {}x{}, expected {}x{}",
                        w.channels(),
                        w.timesteps(),
                        shape.0,
                        shape.1
                    ),
                ));
            }
            if let Some(d) = w.domain {
                if d != domain_id {
                    return Err(Error::InvalidArgument(format!(
                        "window {i} of `{name}` has domain {d}, expected {domain_id}"
                    )));
                }
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "window {i} of `{name}` contains non-finite values"
                )));
            }
        }
        Ok(Self {
            windows,
            domain_id,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// `(channels, timesteps)` shared by every window.
    pub fn shape(&self) -> (usize, usize) {
        let w = &self.windows[0];
        (w.channels(), w.timesteps())
    }

    /// Windows per activity class, indexed by class.
    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for w in &self.windows {
            if let Some(c) = counts.get_mut(w.activity as usize) {
                *c += 1;
            }
        }
        counts
    }

    /// Returns a copy with every window relabeled to `domain`.
    pub fn relabeled(&self, domain_id: u16, domain: Option<u16>) -> DomainDataset {
        DomainDataset {
            windows: self
                .windows
                .iter()
                .map(|w| SensorWindow {
                    domain,
                    ..w.clone()
                })
                .collect(),
            domain_id,
            name: self.name.clone(),
        }
    }
}

/// Groups subject IDs into consecutive domains of the given sizes.
pub fn group_subjects(subjects: &[u32], sizes: &[usize]) -> Result<Vec<Vec<u32>>> {
    if sizes.iter().sum::<usize>() != subjects.len() {
        return Err(Error::Config(format!(
            "group sizes {sizes:?} do not cover {} subjects",
            subjects.len()
        )));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(subjects[start..start + s].to_vec());
        start += s;
    }
    Ok(out)
}
