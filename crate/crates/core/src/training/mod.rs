//! The training objective, SGD with momentum, and the epoch loop with early
//! stopping.

mod config;
mod losses;
mod sgd;
mod step;
mod trainer;

pub use config::{Baseline, Selection, TrainConfig};
pub use losses::{classification_loss, domain_invariant_loss, domain_specific_loss, InvariantLoss, LossGrad, PROB_FLOOR};
pub use sgd::{sgd_step, sgd_update, Sgd};
pub use step::{standardize, total_loss, Batch, LossBreakdown, StepOutput};
pub use trainer::{
    infer, infer_with_stats, model_config_for, train, train_with, validate_on, EpochRecord, Inference, StopReason,
    TrainLog, Validation,
};
