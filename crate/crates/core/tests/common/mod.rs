#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlstar::env::{ActionSpec, EnvError, Environment, Info, ObservationSpec, StepResult};
use rlstar::nn::{MlpParams, PolicyParams};
use rlstar::ppo::{Minibatch, TrainConfig};

/// Truncated double-sum definition of GAE:
/// `A_t = sum_k (gamma * lambda)^k * delta_{t+k}`, stopping after the first
/// transition that ends an episode.
pub fn gae_brute_force(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| {
        let live = if dones[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * live * next_value(t) - values[t]
    };
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut weight = 1.0;
            for (k, &done) in dones.iter().enumerate().skip(t) {
                total += weight * delta(k);
                if done {
                    break;
                }
                weight *= gamma * lambda;
            }
            total
        })
        .collect()
}

/// Counts steps; episodes last `len` steps. Observation is `[steps_taken, resets]`.
pub struct Counter {
    pub len: u32,
    pub t: u32,
    pub resets: u32,
    action: ActionSpec,
    obs: ObservationSpec,
}

impl Counter {
    pub fn new(len: u32) -> Self {
        Self {
            len,
            t: 0,
            resets: 0,
            action: ActionSpec::new(vec![0.0; 2], vec![1.0; 2]).unwrap(),
            obs: ObservationSpec::new(vec![0.0, 0.0], vec![1e9, 1e9]).unwrap(),
        }
    }
}

impl Environment for Counter {
    fn action_spec(&self) -> &ActionSpec {
        &self.action
    }
    fn observation_spec(&self) -> &ObservationSpec {
        &self.obs
    }
    fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        self.t = 0;
        self.resets += 1;
        Ok(vec![0.0, f64::from(self.resets)])
    }
    fn step(&mut self, _action: &[f64]) -> Result<StepResult, EnvError> {
        self.t += 1;
        Ok(StepResult {
            observation: vec![f64::from(self.t), f64::from(self.resets)],
            reward: 1.0,
            done: self.t >= self.len,
            info: Info::new(),
        })
    }
}

pub fn random_policy(obs_dim: usize, act_dim: usize, hidden: &[usize], seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = PolicyParams::init(obs_dim, act_dim, hidden, &mut rng).unwrap();
    // Nonzero biases and log-std so every parameter carries gradient.
    for net in [&mut p.actor, &mut p.critic] {
        for b in &mut net.biases {
            b.iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        }
    }
    for s in &mut p.log_std {
        *s = rng.gen_range(-0.5..0.2);
    }
    p
}

/// Random minibatch whose old log-probabilities and values sit near the
/// current policy's, so some samples are clipped and some are not.
pub fn random_minibatch(policy: &PolicyParams, n: usize, seed: u64) -> Minibatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = policy.obs_dim();
    let act_dim = policy.act_dim();
    let observations = Array2::from_shape_fn((n, obs_dim), |_| rng.gen_range(-1.0..1.0));
    let actions = Array2::from_shape_fn((n, act_dim), |_| rng.gen_range(-0.5..1.5));
    let mut old_logprobs = Vec::new();
    let mut old_values = Vec::new();
    for i in 0..n {
        let row = observations.row(i).to_vec();
        let (mean, value) = policy.evaluate(&row).unwrap();
        let a = actions.row(i).to_vec();
        let (lp, _) = rlstar::nn::gaussian_logprob_entropy(&mean, &policy.log_std, &a);
        old_logprobs.push(lp + rng.gen_range(-0.4..0.4));
        old_values.push(value + rng.gen_range(-0.5..0.5));
    }
    let advantages = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let returns = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Minibatch {
        observations,
        actions,
        old_logprobs,
        old_values,
        advantages,
        returns,
    }
}

/// Nudges one flat parameter, in `ParamSet` order.
pub fn perturbed(p: &PolicyParams, idx: usize, h: f64) -> PolicyParams {
    use rlstar::nn::ParamSet;
    let mut q = p.clone();
    let mut k = idx;
    let mut hit = false;
    for s in q.slices_mut() {
        if k < s.len() {
            s[k] += h;
            hit = true;
            break;
        }
        k -= s.len();
    }
    assert!(hit, "index {idx} out of range");
    q
}

/// Central-difference check of the full PPO loss at the given flat indices.
/// Returns the worst relative error.
pub fn ppo_gradcheck(policy: &PolicyParams, mb: &Minibatch, cfg: &TrainConfig, indices: &[usize]) -> f64 {
    use rlstar::nn::ParamSet;
    use rlstar::ppo::ppo_loss;
    let (_, grads) = ppo_loss(policy, mb, cfg, true).unwrap();
    let analytic = grads.unwrap().to_flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for &i in indices {
        let up = ppo_loss(&perturbed(policy, i, h), mb, cfg, false).unwrap().0.total;
        let down = ppo_loss(&perturbed(policy, i, -h), mb, cfg, false).unwrap().0.total;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

pub fn single_layer(w: f64, b: f64) -> MlpParams {
    let mut p = MlpParams::zeros(&[1, 1]).unwrap();
    p.weights[0][[0, 0]] = w;
    p.biases[0][0] = b;
    p
}

/// Deterministic pseudo-random wheel commands, slightly outside `[0, 1]` at
/// times so clamping is exercised too.
pub fn scripted_actions(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen_range(-0.1..1.1), rng.gen_range(-0.1..1.1)]).collect()
}

/// Drives `env` with `actions` from `reset(Some(seed))`, resetting with
/// `None` whenever an episode ends. Returns every observation and reward.
pub fn drive<E: Environment>(env: &mut E, seed: u64, actions: &[[f64; 2]]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut observations = vec![env.reset(Some(seed)).unwrap()];
    let mut rewards = Vec::new();
    for a in actions {
        let s = env.step(a).unwrap();
        observations.push(s.observation);
        rewards.push(s.reward);
        if s.done {
            observations.push(env.reset(None).unwrap());
        }
    }
    (observations, rewards)
}

/// Largest absolute componentwise difference between two trajectories.
pub fn max_deviation(a: &(Vec<Vec<f64>>, Vec<f64>), b: &(Vec<Vec<f64>>, Vec<f64>)) -> f64 {
    assert_eq!(a.0.len(), b.0.len(), "observation counts differ");
    assert_eq!(a.1.len(), b.1.len(), "reward counts differ");
    let mut worst: f64 = 0.0;
    for (x, y) in a.0.iter().zip(&b.0) {
        assert_eq!(x.len(), y.len());
        for (u, v) in x.iter().zip(y) {
            worst = worst.max((u - v).abs());
        }
    }
    for (u, v) in a.1.iter().zip(&b.1) {
        worst = worst.max((u - v).abs());
    }
    worst
}

/// Default run settings writing to `dir`, with a reproducible clock column.
pub fn run_config(dir: &std::path::Path, timesteps: u64, seed: u64) -> rlstar::runner::RunConfig {
    let mut cfg = rlstar::runner::RunConfig::default();
    cfg.train.total_timesteps = timesteps;
    cfg.seed = seed;
    cfg.out_dir = dir.to_path_buf();
    cfg.clock = rlstar::runner::ClockMode::Simulated;
    cfg
}
