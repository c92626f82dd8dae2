use std::fmt::Write as _;

use ndarray::Array2;

use super::metrics::{confusion_matrix, micro_roc_auc, precision_recall_f1, ClassMetrics};
use crate::data::{DomainDataset, NormStats, SensorWindow};
use crate::error::{Error, Result};
use crate::network::ModelParams;
use crate::training::{infer_with_stats, Inference};

/// Every metric for one evaluated dataset.
///
/// Text form, one `key = value` per line in this order: `num_windows`,
/// `num_classes`, `weighted_f1`, `accuracy`, `weighted_precision`,
/// `weighted_recall`, `macro_f1`, `auc`, then for each class `c`
/// `class.c.precision`, `class.c.recall`, `class.c.f1`, `class.c.support`,
/// then `mean_weight.k` for each fusion weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub num_windows: usize,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Array2<u64>,
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
    /// Mean fusion weight per training branch over the evaluated windows.
    pub mean_weights: Vec<f64>,
}

/// Standardizes with `stats`, classifies, and scores the dataset.
pub fn evaluate(params: &ModelParams, dataset: &DomainDataset, stats: &NormStats) -> Result<EvalReport> {
    Ok(evaluate_with_inference(params, &dataset.windows, stats)?.0)
}

/// [`evaluate`] on raw windows, also returning the per-window predictions.
pub fn evaluate_with_inference(
    params: &ModelParams,
    windows: &[SensorWindow],
    stats: &NormStats,
) -> Result<(EvalReport, Inference)> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    let refs: Vec<&SensorWindow> = windows.iter().collect();
    let out = infer_with_stats(params, &refs, Some(stats))?;
    let truth: Vec<usize> = windows.iter().map(|w| w.activity as usize).collect();
    let c = params.config.num_classes;
    let confusion = confusion_matrix(&truth, &out.predictions, c)?;
    let m = precision_recall_f1(&confusion);
    let roc = micro_roc_auc(&out.probs.view(), &truth)?;
    let n = windows.len() as f64;
    let mean_weights = out.weights.columns().into_iter().map(|col| col.sum() / n).collect();
    Ok((
        EvalReport {
            num_windows: windows.len(),
            weighted_f1: m.weighted_f1,
            accuracy: m.accuracy,
            weighted_precision: m.weighted_precision,
            weighted_recall: m.weighted_recall,
            macro_f1: m.macro_f1,
            per_class: m.per_class,
            confusion,
            roc: roc.points,
            auc: roc.auc,
            mean_weights,
        },
        out,
    ))
}

fn parse_err(reason: impl Into<String>) -> Error {
    Error::Other(format!("evaluation report: {}", reason.into()))
}

impl EvalReport {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("num_windows", self.num_windows.to_string());
        kv("num_classes", self.num_classes().to_string());
        kv("weighted_f1", self.weighted_f1.to_string());
        kv("accuracy", self.accuracy.to_string());
        kv("weighted_precision", self.weighted_precision.to_string());
        kv("weighted_recall", self.weighted_recall.to_string());
        kv("macro_f1", self.macro_f1.to_string());
        kv("auc", self.auc.to_string());
        for (i, m) in self.per_class.iter().enumerate() {
            kv(&format!("class.{i}.precision"), m.precision.to_string());
            kv(&format!("class.{i}.recall"), m.recall.to_string());
            kv(&format!("class.{i}.f1"), m.f1.to_string());
            kv(&format!("class.{i}.support"), m.support.to_string());
        }
        for (k, w) in self.mean_weights.iter().enumerate() {
            kv(&format!("mean_weight.{k}"), w.to_string());
        }
        s
    }

    /// Confusion matrix with a header row of predicted classes.
    pub fn confusion_csv(&self) -> String {
        let c = self.confusion.ncols();
        let mut s = String::from("true");
        for j in 0..c {
            let _ = write!(s, ",pred_{j}");
        }
        s.push('\n');
        for (i, row) in self.confusion.rows().into_iter().enumerate() {
            s.push_str(&i.to_string());
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (f, t) in &self.roc {
            let _ = writeln!(s, "{f},{t}");
        }
        s
    }

    /// Rebuilds a report from its text and confusion CSV (the ROC curve is
    /// read separately with [`EvalReport::parse_roc_csv`]).
    pub fn from_text(text: &str, confusion_csv: &str) -> Result<EvalReport> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| parse_err(format!("bad line `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> { map.get(k).ok_or_else(|| parse_err(format!("missing key `{k}`"))) };
        let f = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| parse_err(format!("bad number for `{k}`"))) };
        let u = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| parse_err(format!("bad count for `{k}`"))) };
        let c = u("num_classes")? as usize;
        let per_class = (0..c)
            .map(|i| {
                Ok(ClassMetrics {
                    precision: f(&format!("class.{i}.precision"))?,
                    recall: f(&format!("class.{i}.recall"))?,
                    f1: f(&format!("class.{i}.f1"))?,
                    support: u(&format!("class.{i}.support"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mean_weights = Vec::new();
        while let Some(v) = map.get(&format!("mean_weight.{}", mean_weights.len())) {
            mean_weights.push(v.parse().map_err(|_| parse_err("bad mean weight"))?);
        }
        let mut confusion = Array2::zeros((c, c));
        for (i, line) in confusion_csv.lines().skip(1).enumerate() {
            if i >= c {
                return Err(parse_err("confusion matrix has too many rows"));
            }
            let cells: Vec<&str> = line.split(',').skip(1).collect();
            if cells.len() != c {
                return Err(parse_err(format!("confusion row {i} has {} cells", cells.len())));
            }
            for (j, v) in cells.iter().enumerate() {
                confusion[[i, j]] = v.parse().map_err(|_| parse_err("bad confusion cell"))?;
            }
        }
        Ok(EvalReport {
            num_windows: u("num_windows")? as usize,
            weighted_f1: f("weighted_f1")?,
            accuracy: f("accuracy")?,
            weighted_precision: f("weighted_precision")?,
            weighted_recall: f("weighted_recall")?,
            macro_f1: f("macro_f1")?,
            per_class,
            confusion,
            roc: Vec::new(),
            auc: f("auc")?,
            mean_weights,
        })
    }

    pub fn parse_roc_csv(text: &str) -> Result<Vec<(f64, f64)>> {
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (a, b) = l.split_once(',').ok_or_else(|| parse_err("bad ROC line"))?;
                Ok((
                    a.parse().map_err(|_| parse_err("bad fpr"))?,
                    b.parse().map_err(|_| parse_err("bad tpr"))?,
                ))
            })
            .collect()
    }
}
