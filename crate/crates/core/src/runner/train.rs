use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClockMode, RunConfig, RunnerError};
use crate::checkpoint::save_checkpoint;
use crate::nn::{AdamState, ParamSet, PolicyParams};
use crate::ppo::{ppo_update, EpisodeSummary, RolloutCollector, UpdateMetrics};

pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

/// Column order of the metrics file.
pub const METRICS_COLUMNS: [&str; 11] = [
    "update",
    "timesteps",
    "wall_clock_s",
    "ep_reward_mean",
    "ep_len_mean",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_frac",
];

/// One row of the metrics file, averaged over the preceding `log_interval`
/// updates. Episode statistics cover episodes that finished inside the
/// window and are NaN when none did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: u64,
    pub timesteps: u64,
    pub wall_clock_s: f64,
    pub ep_reward_mean: f64,
    pub ep_len_mean: f64,
    /// Fraction of window episodes that captured at least one waypoint.
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub points: Vec<CurvePoint>,
    pub updates: u64,
    pub timesteps: u64,
    /// Stopped early by the stop flag.
    pub interrupted: bool,
}

/// Seeds the parameter initialization stream.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeds the stream used for action sampling and minibatch shuffling.
pub fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summarize(update: u64, timesteps: u64, clock_s: f64, metrics: &[UpdateMetrics], episodes: &[EpisodeSummary]) -> CurvePoint {
    CurvePoint {
        update,
        timesteps,
        wall_clock_s: clock_s,
        ep_reward_mean: mean(episodes.iter().map(|e| e.reward)),
        ep_len_mean: mean(episodes.iter().map(|e| f64::from(e.length))),
        success_rate: mean(episodes.iter().map(|e| f64::from(u8::from(e.waypoints_reached >= 1)))),
        policy_loss: mean(metrics.iter().map(|m| m.policy_loss)),
        value_loss: mean(metrics.iter().map(|m| m.value_loss)),
        entropy: mean(metrics.iter().map(|m| m.entropy)),
        approx_kl: mean(metrics.iter().map(|m| m.approx_kl)),
        clip_frac: mean(metrics.iter().map(|m| m.clip_frac)),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Io(format!("{}: {e}", path.display()))
}

/// Trains until `total_timesteps` are consumed.
pub fn train(config: &RunConfig) -> Result<TrainOutcome, RunnerError> {
    train_until(config, None)
}

/// Like [`train`], but checks `stop` between updates and, once it is set,
/// writes the final checkpoint and returns early.
pub fn train_until(config: &RunConfig, stop: Option<&AtomicBool>) -> Result<TrainOutcome, RunnerError> {
    config.validate()?;
    let out_dir = config.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config).expect("config serializes"),
    )
    .map_err(|e| io_err(&out_dir, e))?;

    let env = config.make_env()?;
    let obs_dim = env.observation_spec().dim();
    let act_dim = env.action_spec().dim();
    let mut collector = RolloutCollector::new(env, config.seed).map_err(|e| RunnerError::Io(e.to_string()))?;

    let mut policy = PolicyParams::init(obs_dim, act_dim, &config.layer_sizes, &mut init_rng(config.seed))
        .map_err(|e| RunnerError::Config(e.to_string()))?;
    let mut adam = AdamState::new(policy.num_params());
    let mut rng = training_rng(config.seed);

    let file = File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
    let mut csv = csv::Writer::from_writer(file);

    let cfg = &config.train;
    let total_updates = cfg.num_updates();
    let started = Instant::now();
    let mut timesteps = 0u64;
    let mut window_metrics = Vec::new();
    let mut window_episodes = Vec::new();
    let mut points = Vec::new();
    let mut updates = 0;
    let mut interrupted = false;

    for update in 1..=total_updates {
        if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
            interrupted = true;
            break;
        }
        let (mut batch, episodes) = collector.collect(&policy, cfg.n_steps, &mut rng).map_err(|e| match e {
            crate::ppo::PpoError::Env(e) => RunnerError::Io(e.to_string()),
            other => RunnerError::Numerical(other.to_string()),
        })?;
        batch
            .compute_advantages(cfg.gamma, cfg.gae_lambda)
            .map_err(|e| RunnerError::Numerical(e.to_string()))?;
        let metrics = match ppo_update(&mut policy, &batch, cfg, &mut adam, &mut rng) {
            Ok(m) => m,
            Err(e) => {
                // Keep the last good parameters for post-mortem.
                let dump = out_dir.join("failed.ckpt");
                let _ = save_checkpoint(&policy, Some(&adam), &dump);
                return Err(RunnerError::Numerical(format!("{e}; parameters dumped to {}", dump.display())));
            }
        };
        timesteps += cfg.n_steps as u64;
        updates = update;
        window_metrics.push(metrics);
        window_episodes.extend(episodes);

        if update % config.log_interval == 0 {
            let clock_s = match config.clock {
                ClockMode::Wall => started.elapsed().as_secs_f64(),
                ClockMode::Simulated => timesteps as f64 * config.rover.dt,
            };
            let point = summarize(update, timesteps, clock_s, &window_metrics, &window_episodes);
            csv.serialize(point).map_err(|e| io_err(&metrics_path, e))?;
            csv.flush().map_err(|e| io_err(&metrics_path, e))?;
            info!(
                "update {update}/{total_updates} steps {timesteps} reward {:.2} success {:.2}",
                point.ep_reward_mean, point.success_rate
            );
            points.push(point);
            window_metrics.clear();
            window_episodes.clear();
        }
        if config.checkpoint_interval > 0 && update % config.checkpoint_interval == 0 {
            let path = out_dir.join(format!("update_{update:06}.ckpt"));
            save_checkpoint(&policy, Some(&adam), &path)?;
        }
    }

    csv.flush().map_err(|e| io_err(&metrics_path, e))?;
    save_checkpoint(&policy, Some(&adam), &final_checkpoint)?;
    Ok(TrainOutcome {
        out_dir,
        metrics_path,
        final_checkpoint,
        points,
        updates,
        timesteps,
        interrupted,
    })
}

/// Reads a metrics file written by [`train`].
pub fn read_metrics(path: &Path) -> Result<Vec<CurvePoint>, RunnerError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<CurvePoint>, _>>()
        .map_err(|e| io_err(path, e))
}
