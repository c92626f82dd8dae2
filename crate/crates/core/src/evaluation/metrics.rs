use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall and F1 of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class metrics with support-weighted aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_matrix(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<Array2<u64>> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut m = Array2::zeros((num_classes, num_classes));
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label pair ({t}, {p}) out of range for {num_classes} classes"
            )));
        }
        m[[t, p]] += 1;
    }
    Ok(m)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from a square confusion matrix. Any `0/0` is taken as 0.
pub fn precision_recall_f1(confusion: &Array2<u64>) -> Metrics {
    let c = confusion.nrows().min(confusion.ncols());
    let total: u64 = confusion.sum();
    let mut per_class = Vec::with_capacity(c);
    for i in 0..c {
        let tp = confusion[[i, i]];
        let support = confusion.row(i).sum();
        let predicted = confusion.column(i).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let weighted = |f: fn(&ClassMetrics) -> f64| -> f64 {
        if total == 0 {
            return 0.0;
        }
        per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
    };
    let correct: u64 = (0..c).map(|i| confusion[[i, i]]).sum();
    Metrics {
        accuracy: ratio(correct, total),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
        macro_f1: if c == 0 {
            0.0
        } else {
            per_class.iter().map(|m| m.f1).sum::<f64>() / c as f64
        },
        per_class,
    }
}

/// Support-weighted F1 of a set of predictions.
pub fn weighted_f1(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<f64> {
    Ok(precision_recall_f1(&confusion_matrix(truth, pred, num_classes)?).weighted_f1)
}

/// A ROC curve from `(0, 0)` to `(1, 1)` and the area under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(false positive rate, true positive rate)` in threshold order.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Micro-average ROC: every (sample, class) pair becomes one binary decision
/// scored by the class probability; pairs with equal scores enter the curve
/// together.
pub fn micro_roc_auc(probs: &ArrayView2<f64>, labels: &[usize]) -> Result<Roc> {
    let (n, c) = probs.dim();
    if n != labels.len() {
        return Err(Error::InvalidArgument(format!("{n} probability rows but {} labels", labels.len())));
    }
    if n == 0 || c < 2 {
        return Err(Error::InvalidArgument(format!("ROC needs samples and at least 2 classes, got {n}×{c}")));
    }
    for (i, row) in probs.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("row {i} is not a probability vector")));
        }
        if labels[i] >= c {
            return Err(Error::InvalidArgument(format!("label {} out of range for {c} classes", labels[i])));
        }
    }
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(n * c);
    for (i, row) in probs.rows().into_iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            scored.push((p, labels[i] == j));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = n as f64;
    let negatives = (n * (c - 1)) as f64;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut auc = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let score = scored[i].0;
        while i < scored.len() && scored[i].0 == score {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let point = (fp as f64 / negatives, tp as f64 / positives);
        let prev = *points.last().expect("non-empty");
        auc += (point.0 - prev.0) * (point.1 + prev.1) / 2.0;
        points.push(point);
    }
    Ok(Roc { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m, array![[1, 1], [0, 1]]);
        let m = confusion_matrix(&[2, 0, 2, 1], &[2, 0, 2, 1], 3).unwrap();
        assert_eq!(m, array![[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
        assert_eq!(confusion_matrix(&[], &[], 3).unwrap(), Array2::<u64>::zeros((3, 3)));
        assert!(confusion_matrix(&[0], &[], 2).is_err());
        assert!(confusion_matrix(&[2], &[0], 2).is_err());
    }

    #[test]
    fn hand_metrics() {
        let m = precision_recall_f1(&array![[1, 1], [0, 1]]);
        let c0 = m.per_class[0];
        let c1 = m.per_class[1];
        assert_eq!((c0.precision, c0.recall), (1.0, 0.5));
        assert_eq!((c1.precision, c1.recall), (0.5, 1.0));
        assert!((c0.f1 - 2.0 / 3.0).abs() < 1e-15 && (c1.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.weighted_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_absent() {
        let m = precision_recall_f1(&array![[3, 0, 0], [0, 0, 0], [0, 0, 2]]);
        assert_eq!(m.per_class[1], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
        assert_eq!(m.per_class[0].f1, 1.0);
        assert_eq!(m.weighted_f1, 1.0);
        assert_eq!(m.accuracy, 1.0);
        let empty = precision_recall_f1(&Array2::zeros((2, 2)));
        assert_eq!(empty.weighted_f1, 0.0);
    }

    #[test]
    fn roc_examples() {
        let roc = micro_roc_auc(&array![[0.9, 0.1], [0.4, 0.6]].view(), &[0, 1]).unwrap();
        assert_eq!(roc.auc, 1.0);
        let flat = micro_roc_auc(&array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]].view(), &[0, 1, 1]).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        let wrong = micro_roc_auc(&array![[0.1, 0.9], [0.8, 0.2]].view(), &[0, 1]).unwrap();
        assert_eq!(wrong.auc, 0.0);
        assert!(micro_roc_auc(&array![[0.7, 0.7]].view(), &[0]).is_err());
        assert!(micro_roc_auc(&array![[1.0, 0.0]].view(), &[0, 1]).is_err());
    }
}
