use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{PpoError, RolloutBatch, TrainConfig};
use crate::nn::{adam_step, entropy, gaussian_logprob_entropy, AdamState, ParamSet, PolicyParams};

const ADV_EPS: f64 = 1e-8;

/// Scales `grads` down so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// `(a - mean) / (std + 1e-8)` with the population standard deviation.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + ADV_EPS;
    adv.iter().map(|a| (a - mean) / denom).collect()
}

/// Shuffles `0..n` and splits it into `n_minibatches` equal chunks.
pub fn minibatch_indices<R: Rng + ?Sized>(n: usize, n_minibatches: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    indices.chunks(n / n_minibatches).map(<[usize]>::to_vec).collect()
}

/// Samples for one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub observations: Array2<f64>,
    pub actions: Array2<f64>,
    pub old_logprobs: Vec<f64>,
    pub old_values: Vec<f64>,
    /// Already normalized.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn gather(batch: &RolloutBatch, normalized_adv: &[f64], indices: &[usize]) -> Self {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            observations: batch.observations.select(Axis(0), indices),
            actions: batch.actions.select(Axis(0), indices),
            old_logprobs: pick(&batch.logprobs),
            old_values: pick(&batch.values),
            advantages: pick(normalized_adv),
            returns: pick(&batch.returns),
        }
    }

    pub fn len(&self) -> usize {
        self.old_logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_logprobs.is_empty()
    }
}

/// Loss terms of one minibatch. `total = policy_loss + vf_coef * value_loss
/// - entropy_coef * entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub policy_loss: f64,
    /// Same objective without the ratio clip; diagnostic.
    pub unclipped_policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub max_abs_ratio_dev: f64,
}

/// Clipped PPO loss of `policy` on `mb` and, when `want_grads`, its
/// gradient with respect to every policy parameter.
pub fn ppo_loss(
    policy: &PolicyParams,
    mb: &Minibatch,
    cfg: &TrainConfig,
    want_grads: bool,
) -> Result<(LossTerms, Option<PolicyParams>), PpoError> {
    let b = mb.len();
    let bf = b as f64;
    let eps = cfg.clip_range;
    let act_dim = policy.act_dim();

    let actor_cache = policy.actor.forward_batch(mb.observations.view())?;
    let critic_cache = policy.critic.forward_batch(mb.observations.view())?;
    let means = actor_cache.output();
    let values = critic_cache.output();

    let mut terms = LossTerms::default();
    let mut d_means = Array2::zeros((b, act_dim));
    let mut d_values = Array2::zeros((b, 1));
    let mut d_log_std = vec![0.0; act_dim];
    let inv_std: Vec<f64> = policy.log_std.iter().map(|s| (-s).exp()).collect();

    for i in 0..b {
        let mean = means.row(i);
        let action = mb.actions.row(i);
        let mean_s = mean.as_slice().expect("row-major");
        let action_s = action.as_slice().expect("row-major");
        let (logprob, _) = gaussian_logprob_entropy(mean_s, &policy.log_std, action_s);
        let log_ratio = logprob - mb.old_logprobs[i];
        let ratio = log_ratio.exp();
        let adv = mb.advantages[i];

        let unclipped = -adv * ratio;
        let clipped = -adv * ratio.clamp(1.0 - eps, 1.0 + eps);
        terms.policy_loss += unclipped.max(clipped);
        terms.unclipped_policy_loss += unclipped;
        terms.approx_kl += -log_ratio;
        if (ratio - 1.0).abs() > eps {
            terms.clip_frac += 1.0;
        }
        terms.max_abs_ratio_dev = terms.max_abs_ratio_dev.max((ratio - 1.0).abs());

        if want_grads && unclipped >= clipped {
            // d(loss)/d(logprob); the clipped branch has zero slope.
            let g = -adv * ratio / bf;
            for j in 0..act_dim {
                let z = (action_s[j] - mean_s[j]) * inv_std[j];
                d_means[[i, j]] = g * z * inv_std[j];
                d_log_std[j] += g * (z * z - 1.0);
            }
        }

        let v = values[[i, 0]];
        let v_old = mb.old_values[i];
        let ret = mb.returns[i];
        let v_clipped = v_old + (v - v_old).clamp(-eps, eps);
        let l1 = (v - ret) * (v - ret);
        let l2 = (v_clipped - ret) * (v_clipped - ret);
        terms.value_loss += l1.max(l2);
        if want_grads {
            let dv = if l1 >= l2 {
                2.0 * (v - ret)
            } else if (v - v_old).abs() < eps {
                2.0 * (v_clipped - ret)
            } else {
                0.0
            };
            d_values[[i, 0]] = cfg.vf_coef * 0.5 * dv / bf;
        }
    }

    terms.policy_loss /= bf;
    terms.unclipped_policy_loss /= bf;
    terms.value_loss = 0.5 * terms.value_loss / bf;
    terms.approx_kl /= bf;
    terms.clip_frac /= bf;
    terms.entropy = entropy(&policy.log_std);
    terms.total = terms.policy_loss + cfg.vf_coef * terms.value_loss - cfg.entropy_coef * terms.entropy;

    let grads = if want_grads {
        for d in &mut d_log_std {
            *d -= cfg.entropy_coef;
        }
        let actor = policy.actor.backward(&actor_cache, d_means.view())?;
        let critic = policy.critic.backward(&critic_cache, d_values.view())?;
        Some(PolicyParams {
            actor,
            log_std: d_log_std,
            critic,
        })
    } else {
        None
    };
    Ok((terms, grads))
}

/// Averages over every gradient step of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    /// Loss terms of the very first minibatch, before any parameter change.
    pub first_minibatch: LossTerms,
}

/// Runs `n_epochs` passes of shuffled minibatch steps over `batch`.
/// `batch` must already carry advantages and returns.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut PolicyParams,
    batch: &RolloutBatch,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<UpdateMetrics, PpoError> {
    let n = batch.len();
    if batch.advantages.len() != n || batch.returns.len() != n {
        return Err(PpoError::MissingAdvantages);
    }
    if !n.is_multiple_of(cfg.n_minibatches) {
        return Err(PpoError::InvalidConfig(format!(
            "batch of {n} does not split into {} minibatches",
            cfg.n_minibatches
        )));
    }
    let adv = normalize_advantages(&batch.advantages);
    let mut metrics = UpdateMetrics::default();
    let mut count = 0.0;

    for epoch in 0..cfg.n_epochs {
        for (k, chunk) in minibatch_indices(n, cfg.n_minibatches, rng).iter().enumerate() {
            let mb = Minibatch::gather(batch, &adv, chunk);
            let (terms, grads) = ppo_loss(policy, &mb, cfg, true)?;
            let mut grads = grads.expect("gradients requested");
            if !terms.total.is_finite() || !grads.is_finite() {
                return Err(PpoError::NonFiniteLoss {
                    epoch,
                    minibatch: k,
                    terms: format!("{terms:?}"),
                });
            }
            if epoch == 0 && k == 0 {
                metrics.first_minibatch = terms;
            }
            clip_global_norm(&mut grads, cfg.max_grad_norm);
            adam_step(policy, &grads, adam, cfg.learning_rate)?;

            metrics.policy_loss += terms.policy_loss;
            metrics.value_loss += terms.value_loss;
            metrics.entropy += terms.entropy;
            metrics.approx_kl += terms.approx_kl;
            metrics.clip_frac += terms.clip_frac;
            count += 1.0;
        }
    }
    metrics.policy_loss /= count;
    metrics.value_loss /= count;
    metrics.entropy /= count;
    metrics.approx_kl /= count;
    metrics.clip_frac /= count;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpParams;

    fn grads_with(values: &[f64]) -> MlpParams {
        let mut g = MlpParams::zeros(&[1, values.len()]).unwrap();
        for (w, v) in g.weights[0].iter_mut().zip(values) {
            *w = *v;
        }
        g
    }

    #[test]
    fn small_gradients_pass_through() {
        let mut g = grads_with(&[0.3, 0.0]);
        let before = g.clone();
        assert!((clip_global_norm(&mut g, 0.5) - 0.3).abs() < 1e-15);
        assert_eq!(g, before);
    }

    #[test]
    fn large_gradients_are_rescaled() {
        let mut g = grads_with(&[1.2, -1.6]);
        assert_eq!(clip_global_norm(&mut g, 0.5), 2.0);
        assert!((g.weights[0][[0, 0]] - 0.3).abs() < 1e-15);
        assert!((g.weights[0][[1, 0]] + 0.4).abs() < 1e-15);
        assert!((g.squared_norm().sqrt() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_stay_zero() {
        let mut g = grads_with(&[0.0, 0.0]);
        assert_eq!(clip_global_norm(&mut g, 0.5), 0.0);
        assert_eq!(g, grads_with(&[0.0, 0.0]));
    }

    #[test]
    fn constant_advantages_normalize_to_zero() {
        let a = normalize_advantages(&[3.0; 8]);
        assert!(a.iter().all(|&v| v == 0.0));
        let a = normalize_advantages(&[1.0, 3.0]);
        assert!((a[0] + 1.0).abs() < 1e-7 && (a[1] - 1.0).abs() < 1e-7);
    }
}
