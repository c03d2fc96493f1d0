//! Proximal policy optimization with a clipped surrogate objective.
//!
//! One training cycle collects a fixed number of environment steps with the
//! current policy, turns them into advantages with GAE, then takes several
//! epochs of shuffled minibatch Adam steps on the clipped loss.

mod config;
mod gae;
mod rollout;
mod update;

pub use config::TrainConfig;
pub use gae::compute_gae;
pub use rollout::{collect_rollout, EpisodeSummary, RolloutBatch, RolloutCollector};
pub use update::{
    clip_global_norm, minibatch_indices, normalize_advantages, ppo_loss, ppo_update, LossTerms, Minibatch, UpdateMetrics,
};

use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid training setting: {0}")]
    InvalidConfig(String),
    #[error("array lengths differ: rewards {rewards}, values {values}, dones {dones}")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
    #[error("batch has no advantages; call compute_advantages first")]
    MissingAdvantages,
    #[error("non-finite loss or gradient at epoch {epoch}, minibatch {minibatch}: {terms}")]
    NonFiniteLoss { epoch: usize, minibatch: usize, terms: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
