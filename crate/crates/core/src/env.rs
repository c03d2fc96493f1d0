//! Environment contract shared by the learner, the tasks and the simulator bridge.
//!
//! The learner drives an [`Environment`] synchronously: it calls
//! [`Environment::reset`] to start an episode and [`Environment::step`] once per
//! control period. Any task/simulator pairing, local or remote, plugs in behind
//! this trait.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::bridge::BridgeError;

/// Per-step diagnostics. Ordered so that serialized transitions are stable.
pub type Info = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action has {got} components, environment expects {expected}")]
    ActionDimensionMismatch { expected: usize, got: usize },
    #[error("step called on a finished episode; call reset first")]
    EpisodeFinished,
    #[error("step called before the first reset")]
    NotReset,
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("space dimension must be positive")]
    ZeroDimension,
    #[error("bounds have lengths {low}/{high}, expected {dim}")]
    LengthMismatch { dim: usize, low: usize, high: usize },
    #[error("bound {index}: low {low} is not below high {high}")]
    EmptyInterval { index: usize, low: f64, high: f64 },
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_box(dim: usize, low: &[f64], high: &[f64]) -> Result<(), SpecError> {
    if dim == 0 {
        return Err(SpecError::ZeroDimension);
    }
    if low.len() != dim || high.len() != dim {
        return Err(SpecError::LengthMismatch {
            dim,
            low: low.len(),
            high: high.len(),
        });
    }
    for (index, (&l, &h)) in low.iter().zip(high).enumerate() {
        // NaN bounds fail this comparison too.
        if !(l < h) {
            return Err(SpecError::EmptyInterval {
                index,
                low: l,
                high: h,
            });
        }
    }
    Ok(())
}

/// Box-shaped action space. Bounds are in agent units, before any scaling
/// applied by the task.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    dim: usize,
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ActionSpec {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, SpecError> {
        let dim = low.len();
        check_box(dim, &low, &high)?;
        Ok(Self { dim, low, high })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    /// Clamps `action` into the box in place and returns how many components
    /// were moved. NaN components are mapped to the lower bound.
    pub fn clamp(&self, action: &mut [f64]) -> usize {
        let mut clamped = 0;
        for ((a, &lo), &hi) in action.iter_mut().zip(&self.low).zip(&self.high) {
            let c = if a.is_nan() { lo } else { a.clamp(lo, hi) };
            if c != *a || a.is_nan() {
                clamped += 1;
            }
            *a = c;
        }
        clamped
    }

    pub fn contains(&self, action: &[f64]) -> bool {
        action.len() == self.dim
            && action
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(a, (lo, hi))| a >= lo && a <= hi)
    }
}

/// Box-shaped observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    dim: usize,
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ObservationSpec {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, SpecError> {
        let dim = low.len();
        check_box(dim, &low, &high)?;
        Ok(Self { dim, low, high })
    }

    /// `dim`-dimensional box `[-1, 1]^dim`.
    pub fn symmetric_unit(dim: usize) -> Result<Self, SpecError> {
        Self::new(vec![-1.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, obs: &[f64]) -> bool {
        obs.len() == self.dim
            && obs
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(o, (lo, hi))| o >= lo && o <= hi)
    }
}

/// What one call to [`Environment::step`] hands back to the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

/// Synchronous reset/step environment.
///
/// Implementations are single-threaded; they must be `Send` so that
/// independent instances can live on different threads.
pub trait Environment: Send {
    fn action_spec(&self) -> &ActionSpec;

    fn observation_spec(&self) -> &ObservationSpec;

    /// Starts a new episode. `Some(seed)` reseeds the environment's random
    /// stream so that identical seeds give identical episodes; `None` keeps
    /// drawing from the current stream.
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError>;

    /// Advances the simulation by one control period.
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn action_spec(&self) -> &ActionSpec {
        (**self).action_spec()
    }

    fn observation_spec(&self) -> &ObservationSpec {
        (**self).observation_spec()
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
}

type Constructor<C> = Box<dyn Fn(&C) -> Box<dyn Environment> + Send + Sync>;

/// Maps task names to environment constructors. `C` is whatever settings
/// object the caller uses to parameterize a task.
pub struct Registry<C> {
    constructors: BTreeMap<String, Constructor<C>>,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown task `{name}`; registered tasks: {}", .registered.join(", "))]
pub struct UnknownTask {
    pub name: String,
    pub registered: Vec<String>,
}

impl<C> Registry<C> {
    pub fn new() -> Self {
        Self {
            constructors: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: impl Into<String>, ctor: F)
    where
        F: Fn(&C) -> Box<dyn Environment> + Send + Sync + 'static,
    {
        self.constructors.insert(name.into(), Box::new(ctor));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.constructors.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.constructors.keys().cloned().collect()
    }

    pub fn make(&self, name: &str, settings: &C) -> Result<Box<dyn Environment>, UnknownTask> {
        match self.constructors.get(name) {
            Some(ctor) => Ok(ctor(settings)),
            None => Err(UnknownTask {
                name: name.to_owned(),
                registered: self.names(),
            }),
        }
    }
}

impl<C> Default for Registry<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C> fmt::Debug for Registry<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("tasks", &self.names())
            .finish()
    }
}
