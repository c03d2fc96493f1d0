//! Networks, the Gaussian policy head and the optimizer.

mod adam;
mod gaussian;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use gaussian::{entropy, gaussian_logprob_entropy, logprob_grad, HALF_LN_2PI};
pub use mlp::{ForwardCache, MlpParams};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("layer sizes {0:?} need at least two entries, all positive")]
    BadLayerSizes(Vec<usize>),
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("activation cache does not match this network or gradient shape")]
    CacheMismatch,
    #[error("parameter count mismatch: params {params}, grads {grads}, optimizer state {state}")]
    ShapeMismatch { params: usize, grads: usize, state: usize },
    #[error("inconsistent policy heads: {0}")]
    HeadMismatch(String),
}

/// A collection of parameters with a fixed storage order.
pub trait ParamSet {
    fn slices(&self) -> Box<dyn Iterator<Item = &[f64]> + '_>;
    fn slices_mut(&mut self) -> Box<dyn Iterator<Item = &mut [f64]> + '_>;

    fn num_params(&self) -> usize {
        self.slices().map(<[f64]>::len).sum()
    }

    fn squared_norm(&self) -> f64 {
        self.slices().flatten().map(|v| v * v).sum()
    }

    fn scale(&mut self, factor: f64) {
        self.slices_mut().flatten().for_each(|v| *v *= factor);
    }

    fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }
}

impl ParamSet for MlpParams {
    fn slices(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        Box::new(MlpParams::slices(self))
    }

    fn slices_mut(&mut self) -> Box<dyn Iterator<Item = &mut [f64]> + '_> {
        Box::new(MlpParams::slices_mut(self))
    }
}

/// Hidden layer widths of both networks.
pub const DEFAULT_HIDDEN: [usize; 5] = [64, 128, 164, 128, 64];

/// Actor and critic networks with a state-independent action log-std.
///
/// The actor maps an observation to the mean of a diagonal Gaussian over
/// actions; the critic maps it to a scalar state value. They share no
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: MlpParams,
    pub log_std: Vec<f64>,
    pub critic: MlpParams,
}

impl PolicyParams {
    pub fn init<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let sizes = |out: usize| {
            let mut s = Vec::with_capacity(hidden.len() + 2);
            s.push(obs_dim);
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = MlpParams::init(&sizes(act_dim), rng)?;
        let critic = MlpParams::init(&sizes(1), rng)?;
        Ok(Self {
            actor,
            log_std: vec![0.0; act_dim],
            critic,
        })
    }

    pub fn from_parts(actor: MlpParams, log_std: Vec<f64>, critic: MlpParams) -> Result<Self, NnError> {
        if actor.output_dim() != log_std.len() || critic.output_dim() != 1 || actor.input_dim() != critic.input_dim() {
            return Err(NnError::HeadMismatch(format!(
                "actor {:?}, log_std {}, critic {:?}",
                actor.layer_sizes(),
                log_std.len(),
                critic.layer_sizes()
            )));
        }
        Ok(Self { actor, log_std, critic })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            actor: self.actor.zeros_like(),
            log_std: vec![0.0; self.log_std.len()],
            critic: self.critic.zeros_like(),
        }
    }

    pub fn is_finite(&self) -> bool {
        ParamSet::slices(self).all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Action mean and state value for one observation.
    pub fn evaluate(&self, obs: &[f64]) -> Result<(Vec<f64>, f64), NnError> {
        let (mean, _) = self.actor.forward(obs)?;
        let (value, _) = self.critic.forward(obs)?;
        Ok((mean, value[0]))
    }
}

impl ParamSet for PolicyParams {
    /// Actor, then log-std, then critic.
    fn slices(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        Box::new(
            self.actor
                .slices()
                .chain(std::iter::once(self.log_std.as_slice()))
                .chain(self.critic.slices()),
        )
    }

    fn slices_mut(&mut self) -> Box<dyn Iterator<Item = &mut [f64]> + '_> {
        Box::new(
            self.actor
                .slices_mut()
                .chain(std::iter::once(self.log_std.as_mut_slice()))
                .chain(self.critic.slices_mut()),
        )
    }
}
