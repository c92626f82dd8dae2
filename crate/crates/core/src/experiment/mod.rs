//! Leave-one-domain-out experiments over seeds, hyperparameter grids and
//! alignment distances, with their result directories.

mod run;
mod spec;
mod sweep;

pub use run::{
    aggregate_from_dir, run_experiment, AggregateRow, AggregateTable, ExperimentResult, RunOptions, RunOutcome,
    RunResult,
};
pub use spec::{Ablation, DatasetKind, ExperimentSpec, Target};
pub use sweep::{
    grid_argmax, run_distance_substitution, run_sweep, SubstitutionResult, SubstitutionRow, SweepResult, BETA_GRID,
    LAMBDA_GRID,
};
