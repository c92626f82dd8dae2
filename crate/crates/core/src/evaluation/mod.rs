//! Classification metrics and evaluation reports.

mod metrics;
mod report;

pub use metrics::{confusion_matrix, micro_roc_auc, precision_recall_f1, weighted_f1, ClassMetrics, Metrics, Roc};
pub use report::{evaluate, evaluate_with_inference, EvalReport};
