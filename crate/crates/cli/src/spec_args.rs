use std::path::PathBuf;

use clap::Args;
use fusedg_core::distances::DistanceKind;
use fusedg_core::experiment::{Ablation, DatasetKind, ExperimentSpec, RunOptions, Target};
use fusedg_core::training::Baseline;

/// Flags shared by every command that runs experiments. Each one overrides
/// the key of the same name in the configuration file.
#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// TOML file with the experiment specification.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dsads, uschad, pamap2 or synthetic.
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    /// Raw dataset directory or an imported window file.
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Held-out domain index, or `all` for the full rotation.
    #[arg(long)]
    pub target: Option<Target>,
    /// Runs per target.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Seed of the first run.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// mmd, coral or adversarial.
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    /// full, cls_only, cls+dir or cls+dsr.
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// fused or erm.
    #[arg(long)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Fuse with the one-hot true domain during training.
    #[arg(long)]
    pub fusion_teacher: bool,
    /// Any other key, e.g. `--set model.branch_width=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Parallel runs (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Parent directory of the result directories.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Overwrite an existing result directory for the same spec.
    #[arg(long)]
    pub force: bool,
}

fn literal(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Sets a dotted key inside a TOML value, creating tables on the way.
pub fn set_key(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| format!("empty key in `{key}`"))?;
    let mut node = root;
    for p in parts {
        let table = node.as_table_mut().ok_or_else(|| format!("`{key}`: `{p}` is not a section"))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| format!("`{key}` does not name a key inside a section"))?
        .insert(last.to_string(), value);
    Ok(())
}

impl SpecArgs {
    pub fn spec(&self) -> Result<ExperimentSpec, String> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => ExperimentSpec::default(),
        };
        if !self.set.is_empty() {
            let mut value = toml::Value::try_from(&spec).map_err(|e| e.to_string())?;
            for s in &self.set {
                let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
                set_key(&mut value, k.trim(), literal(v.trim()))?;
            }
            spec = value.try_into().map_err(|e: toml::de::Error| format!("--set: {e}"))?;
        }
        let t = &mut spec.train;
        macro_rules! over {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        over!(self.lambda => t.lambda);
        over!(self.beta => t.beta);
        over!(self.distance => t.distance);
        over!(self.baseline => t.baseline);
        over!(self.learning_rate => t.learning_rate);
        over!(self.momentum => t.momentum);
        over!(self.batch_size => t.batch_size);
        over!(self.max_epochs => t.max_epochs);
        over!(self.patience => t.patience);
        over!(self.seed => t.seed);
        if self.fusion_teacher {
            t.fusion_teacher = true;
        }
        over!(self.dataset => spec.dataset);
        over!(self.target => spec.target);
        over!(self.seeds => spec.seeds);
        over!(self.ablation => spec.ablation);
        over!(self.val_fraction => spec.val_fraction);
        if let Some(root) = &self.data_root {
            spec.data_root = Some(root.clone());
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            workers: if self.workers == 0 {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            } else {
                self.workers
            },
            force: self.force,
        }
    }
}
