//! Run configuration, the training loop, and evaluation.

mod config;
mod eval;
mod train;

pub use config::{task_registry, ClockMode, EnvSettings, RunConfig, ALGORITHMS};
pub use eval::{evaluate, evaluate_policy, EpisodeOutcome, EvalOptions, EvalReport, TrajectoryRow};
pub use train::{
    init_rng, read_metrics, train, train_until, training_rng, CurvePoint, TrainOutcome, FINAL_CHECKPOINT,
    METRICS_COLUMNS, METRICS_FILE,
};

use thiserror::Error;

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl RunnerError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Io(_) | RunnerError::Checkpoint(_) => 3,
            RunnerError::Numerical(_) => 4,
        }
    }
}
