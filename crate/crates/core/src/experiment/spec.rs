use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    dsads, generate_domains, pamap2, read_window_file, uschad, DomainDataset, SynthShiftSpec,
};
use crate::error::{Error, Result};
use crate::network::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Dsads,
    Uschad,
    Pamap2,
    #[default]
    Synthetic,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "dsads" => Ok(DatasetKind::Dsads),
            "uschad" => Ok(DatasetKind::Uschad),
            "pamap2" => Ok(DatasetKind::Pamap2),
            "synthetic" | "synth" => Ok(DatasetKind::Synthetic),
            _ => Err(Error::Config(format!(
                "unknown dataset `{s}` (expected dsads, uschad, pamap2 or synthetic)"
            ))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Dsads => "dsads",
            DatasetKind::Uschad => "uschad",
            DatasetKind::Pamap2 => "pamap2",
            DatasetKind::Synthetic => "synthetic",
        })
    }
}

/// Which domains are held out: every domain in turn, or one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum Target {
    #[default]
    All,
    Index(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<TargetRepr> for Target {
    type Error = Error;

    fn try_from(r: TargetRepr) -> Result<Self> {
        match r {
            TargetRepr::Index(i) => Ok(Target::Index(i)),
            TargetRepr::Name(s) => s.parse(),
        }
    }
}

impl From<Target> for TargetRepr {
    fn from(t: Target) -> Self {
        match t {
            Target::All => TargetRepr::Name("all".into()),
            Target::Index(i) => TargetRepr::Index(i),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Target::All);
        }
        s.parse()
            .map(Target::Index)
            .map_err(|_| Error::Config(format!("target must be `all` or a domain index, got `{s}`")))
    }
}

impl Target {
    pub fn indices(self, num_domains: usize) -> Result<Vec<usize>> {
        match self {
            Target::All => Ok((0..num_domains).collect()),
            Target::Index(i) if i < num_domains => Ok(vec![i]),
            Target::Index(i) => Err(Error::Config(format!(
                "target {i} out of range for {num_domains} domains"
            ))),
        }
    }
}

/// Loss terms kept in an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "cls_only")]
    ClsOnly,
    #[serde(rename = "cls+dir")]
    ClsDir,
    #[serde(rename = "cls+dsr")]
    ClsDsr,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::ClsOnly, Ablation::ClsDir, Ablation::ClsDsr];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::ClsOnly => "cls_only",
            Ablation::ClsDir => "cls+dir",
            Ablation::ClsDsr => "cls+dsr",
        }
    }

    /// Zeroes the weights of the dropped terms.
    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let mut c = config.clone();
        match self {
            Ablation::Full => {}
            Ablation::ClsOnly => (c.lambda, c.beta) = (0.0, 0.0),
            Ablation::ClsDir => c.lambda = 0.0,
            Ablation::ClsDsr => c.beta = 0.0,
        }
        c
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "");
        match norm.as_str() {
            "full" => Ok(Ablation::Full),
            "clsonly" | "cls" => Ok(Ablation::ClsOnly),
            "cls+dir" | "clsdir" => Ok(Ablation::ClsDir),
            "cls+dsr" | "clsdsr" => Ok(Ablation::ClsDsr),
            _ => Err(Error::Config(format!(
                "unknown ablation `{s}` (expected full, cls_only, cls+dir or cls+dsr)"
            ))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything that determines the numbers of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetKind,
    /// Raw dataset directory or an imported window file.
    pub data_root: Option<PathBuf>,
    /// Used when `dataset` is synthetic; its `test_domain` and
    /// `val_fraction` are ignored in favour of `target` and `val_fraction`.
    pub synthetic: SynthShiftSpec,
    pub target: Target,
    /// Number of runs per target; run `i` uses seed `train.seed + i`.
    pub seeds: usize,
    pub ablation: Ablation,
    pub val_fraction: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: DatasetKind::Synthetic,
            data_root: None,
            synthetic: SynthShiftSpec::strong_shift(0),
            target: Target::All,
            seeds: 5,
            ablation: Ablation::Full,
            val_fraction: 0.2,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.dataset != DatasetKind::Synthetic && self.data_root.is_none() {
            return Err(Error::Config(format!("dataset {} needs a data root", self.dataset)));
        }
        Ok(())
    }

    /// Seeds of the individual runs.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.train.seed.wrapping_add(i)).collect()
    }

    /// Training configuration after the ablation switch.
    pub fn effective_train(&self, seed: u64) -> TrainConfig {
        let mut c = self.ablation.apply(&self.train);
        c.seed = seed;
        c
    }

    /// Canonical JSON form, the input of [`ExperimentSpec::digest`].
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Loads (or generates) every domain of the dataset, plus the class count.
    pub fn load_domains(&self) -> Result<(Vec<DomainDataset>, usize)> {
        if self.dataset == DatasetKind::Synthetic {
            return Ok((generate_domains(&self.synthetic)?, self.synthetic.num_classes));
        }
        let root = self
            .data_root
            .as_deref()
            .ok_or_else(|| Error::Config(format!("dataset {} needs a data root", self.dataset)))?;
        load_real(self.dataset, root)
    }
}

fn load_real(kind: DatasetKind, root: &Path) -> Result<(Vec<DomainDataset>, usize)> {
    if root.is_file() {
        let (file, sidecar) = read_window_file(root)?;
        let classes = file.num_classes;
        return Ok((file.into_domains(&sidecar)?, classes));
    }
    if !root.exists() {
        return Err(Error::Missing(root.to_path_buf()));
    }
    Ok(match kind {
        DatasetKind::Dsads => (dsads::import_dsads(root)?, dsads::DsadsOptions::default().activities.len()),
        DatasetKind::Uschad => (uschad::import_uschad(root)?, uschad::UschadOptions::default().activities.len()),
        DatasetKind::Pamap2 => (pamap2::import_pamap2(root)?, pamap2::Pamap2Options::default().activities.len()),
        DatasetKind::Synthetic => unreachable!("handled by the caller"),
    })
}
