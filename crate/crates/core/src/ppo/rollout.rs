use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{compute_gae, PpoError};
use crate::env::{EnvError, Environment};
use crate::nn::{gaussian_logprob_entropy, PolicyParams};

/// Fixed-length block of transitions gathered with one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    /// One observation per row.
    pub observations: Array2<f64>,
    /// Raw policy samples, before the environment clamps them.
    pub actions: Array2<f64>,
    pub logprobs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of the state after the last transition.
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fills `advantages` and `returns`.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), PpoError> {
        let (adv, ret) = compute_gae(&self.rewards, &self.values, &self.dones, self.bootstrap_value, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Outcome of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub reward: f64,
    pub length: u32,
    /// Taken from the `waypoints_reached` info key, zero when absent.
    pub waypoints_reached: u32,
}

/// Drives an environment with a stochastic policy across rollouts, carrying
/// the unfinished episode over from one rollout to the next.
pub struct RolloutCollector<E> {
    env: E,
    obs: Vec<f64>,
    ep_reward: f64,
    ep_len: u32,
}

impl<E: Environment> RolloutCollector<E> {
    /// Resets `env` with `seed` and readies the first observation.
    pub fn new(mut env: E, seed: u64) -> Result<Self, EnvError> {
        let obs = env.reset(Some(seed))?;
        Ok(Self {
            env,
            obs,
            ep_reward: 0.0,
            ep_len: 0,
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn into_env(self) -> E {
        self.env
    }

    /// Observation the next rollout will start from.
    pub fn current_observation(&self) -> &[f64] {
        &self.obs
    }

    /// Collects exactly `n_steps` transitions, resetting the environment
    /// whenever an episode ends. Advantages are left empty.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        policy: &PolicyParams,
        n_steps: usize,
        rng: &mut R,
    ) -> Result<(RolloutBatch, Vec<EpisodeSummary>), PpoError> {
        let obs_dim = policy.obs_dim();
        let act_dim = policy.act_dim();
        if self.obs.len() != obs_dim {
            return Err(PpoError::Nn(crate::nn::NnError::DimensionMismatch {
                expected: obs_dim,
                got: self.obs.len(),
            }));
        }
        let mut observations = Array2::zeros((n_steps, obs_dim));
        let mut actions = Array2::zeros((n_steps, act_dim));
        let mut logprobs = Vec::with_capacity(n_steps);
        let mut values = Vec::with_capacity(n_steps);
        let mut rewards = Vec::with_capacity(n_steps);
        let mut dones = Vec::with_capacity(n_steps);
        let mut episodes = Vec::new();
        let std: Vec<f64> = policy.log_std.iter().map(|s| s.exp()).collect();

        for t in 0..n_steps {
            let (mean, value) = policy.evaluate(&self.obs)?;
            let action: Vec<f64> = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let (logprob, _) = gaussian_logprob_entropy(&mean, &policy.log_std, &action);

            let step = self.env.step(&action)?;
            observations.row_mut(t).assign(&ndarray::aview1(&self.obs));
            actions.row_mut(t).assign(&ndarray::aview1(&action));
            logprobs.push(logprob);
            values.push(value);
            rewards.push(step.reward);
            dones.push(step.done);

            self.ep_reward += step.reward;
            self.ep_len += 1;
            if step.done {
                episodes.push(EpisodeSummary {
                    reward: self.ep_reward,
                    length: self.ep_len,
                    waypoints_reached: step.info.get("waypoints_reached").copied().unwrap_or(0.0) as u32,
                });
                self.ep_reward = 0.0;
                self.ep_len = 0;
                self.obs = self.env.reset(None)?;
            } else {
                self.obs = step.observation;
            }
        }
        let (_, bootstrap_value) = policy.evaluate(&self.obs)?;
        Ok((
            RolloutBatch {
                observations,
                actions,
                logprobs,
                values,
                rewards,
                dones,
                bootstrap_value,
                advantages: Vec::new(),
                returns: Vec::new(),
            },
            episodes,
        ))
    }
}

/// Collects one rollout from a freshly reset environment.
pub fn collect_rollout<E: Environment, R: Rng + ?Sized>(
    env: E,
    policy: &PolicyParams,
    n_steps: usize,
    seed: u64,
    rng: &mut R,
) -> Result<RolloutBatch, PpoError> {
    let mut collector = RolloutCollector::new(env, seed)?;
    Ok(collector.collect(policy, n_steps, rng)?.0)
}
