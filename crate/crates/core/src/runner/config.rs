use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::env::{Environment, Registry};
use crate::nn::DEFAULT_HIDDEN;
use crate::ppmc::{PpmcEnv, TaskConfig};
use crate::ppo::TrainConfig;
use crate::rover::RoverParams;

/// Algorithms the runner can drive.
pub const ALGORITHMS: &[&str] = &["ppo"];

/// What the x-axis of the reward curve measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Real seconds since training started.
    #[default]
    Wall,
    /// Simulated seconds (timesteps times the control period). Makes the
    /// metrics file reproducible byte for byte.
    Simulated,
}

/// Everything a training or evaluation run needs, loaded from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub algorithm: String,
    pub train: TrainConfig,
    pub task_config: TaskConfig,
    pub rover: RoverParams,
    /// Hidden layer widths shared by actor and critic.
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Updates between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Updates averaged into each metrics row.
    pub log_interval: u64,
    pub clock: ClockMode,
    /// Train against a bridge server instead of the built-in simulator.
    pub bridge_connect: Option<String>,
    /// Bridge read timeout, seconds.
    pub bridge_timeout_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: "ppmc".into(),
            algorithm: "ppo".into(),
            train: TrainConfig::default(),
            task_config: TaskConfig::default(),
            rover: RoverParams::default(),
            layer_sizes: DEFAULT_HIDDEN.to_vec(),
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            checkpoint_interval: 100,
            log_interval: 5,
            clock: ClockMode::Wall,
            bridge_connect: None,
            bridge_timeout_s: 30.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Config(format!("invalid run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunnerError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let registry = task_registry();
        if !registry.contains(&self.task) {
            return Err(RunnerError::Config(format!(
                "unknown task `{}` (key `task`); registered tasks: {}",
                self.task,
                registry.names().join(", ")
            )));
        }
        if !ALGORITHMS.contains(&self.algorithm.as_str()) {
            return Err(RunnerError::Config(format!(
                "unknown algorithm `{}` (key `algorithm`); available: {}",
                self.algorithm,
                ALGORITHMS.join(", ")
            )));
        }
        self.train
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        self.task_config
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        self.rover
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        if self.layer_sizes.contains(&0) {
            return Err(RunnerError::Config(format!("layer_sizes {:?} contains a zero width", self.layer_sizes)));
        }
        if self.log_interval == 0 {
            return Err(RunnerError::Config("log_interval must be at least 1".into()));
        }
        if !(self.bridge_timeout_s.is_finite() && self.bridge_timeout_s > 0.0) {
            return Err(RunnerError::Config(format!("bridge_timeout_s = {}", self.bridge_timeout_s)));
        }
        Ok(())
    }

    pub fn env_settings(&self) -> EnvSettings {
        EnvSettings {
            task: self.task_config,
            rover: self.rover,
            seed: self.seed,
        }
    }

    /// Builds the configured environment: remote when `bridge_connect` is
    /// set, otherwise from the task registry.
    pub fn make_env(&self) -> Result<Box<dyn Environment>, RunnerError> {
        if let Some(addr) = &self.bridge_connect {
            let timeout = std::time::Duration::from_secs_f64(self.bridge_timeout_s);
            let env = crate::bridge::RemoteEnv::connect(addr.as_str(), timeout)
                .map_err(|e| RunnerError::Io(e.to_string()))?;
            return Ok(Box::new(env));
        }
        task_registry()
            .make(&self.task, &self.env_settings())
            .map_err(|e| RunnerError::Config(e.to_string()))
    }

    /// Actor and critic layer sizes for the given space dimensions.
    pub fn network_sizes(&self, obs_dim: usize, act_dim: usize) -> (Vec<usize>, Vec<usize>) {
        let with = |out| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(&self.layer_sizes);
            s.push(out);
            s
        };
        (with(act_dim), with(1))
    }
}

/// Parameters handed to task constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSettings {
    pub task: TaskConfig,
    pub rover: RoverParams,
    pub seed: u64,
}

/// Tasks available by name.
pub fn task_registry() -> Registry<EnvSettings> {
    let mut reg = Registry::new();
    reg.register("ppmc", |s: &EnvSettings| {
        let env = PpmcEnv::new(s.task, s.rover, s.seed).expect("settings validated before construction");
        Box::new(env) as Box<dyn Environment>
    });
    reg
}
