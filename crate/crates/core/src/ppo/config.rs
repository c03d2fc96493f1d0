use serde::{Deserialize, Serialize};

use super::PpoError;

/// PPO hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Discount factor.
    pub gamma: f64,
    /// GAE smoothing factor.
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub vf_coef: f64,
    /// Environment steps collected per update.
    pub n_steps: usize,
    /// Passes over each rollout.
    pub n_epochs: usize,
    pub n_minibatches: usize,
    /// Ratio clip range, also used for the value clip.
    pub clip_range: f64,
    pub max_grad_norm: f64,
    pub total_timesteps: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            gamma: 0.9,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            vf_coef: 0.5,
            n_steps: 256,
            n_epochs: 4,
            n_minibatches: 4,
            clip_range: 0.2,
            max_grad_norm: 0.5,
            total_timesteps: 1_000_000,
        }
    }
}

impl TrainConfig {
    pub fn minibatch_size(&self) -> usize {
        self.n_steps / self.n_minibatches
    }

    /// Number of collect/update cycles needed to consume `total_timesteps`.
    pub fn num_updates(&self) -> u64 {
        self.total_timesteps.div_ceil(self.n_steps as u64)
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |name: &str, value: String| Err(PpoError::InvalidConfig(format!("{name} = {value}")));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", self.learning_rate.to_string());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma.to_string());
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", self.gae_lambda.to_string());
        }
        if !(self.entropy_coef.is_finite() && self.vf_coef.is_finite()) {
            return bad("entropy_coef/vf_coef", format!("{}/{}", self.entropy_coef, self.vf_coef));
        }
        if !(self.clip_range.is_finite() && self.clip_range > 0.0) {
            return bad("clip_range", self.clip_range.to_string());
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", self.max_grad_norm.to_string());
        }
        if self.n_steps == 0 || self.n_epochs == 0 || self.n_minibatches == 0 {
            return bad(
                "n_steps/n_epochs/n_minibatches",
                format!("{}/{}/{}", self.n_steps, self.n_epochs, self.n_minibatches),
            );
        }
        if !self.n_steps.is_multiple_of(self.n_minibatches) {
            return bad(
                "n_steps",
                format!("{} (not divisible by n_minibatches {})", self.n_steps, self.n_minibatches),
            );
        }
        if self.total_timesteps == 0 {
            return bad("total_timesteps", "0".into());
        }
        Ok(())
    }
}
