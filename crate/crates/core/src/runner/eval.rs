use std::path::{Path, PathBuf};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{RunConfig, RunnerError};
use crate::checkpoint::load_checkpoint;
use crate::env::Environment;
use crate::nn::PolicyParams;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Act with the policy mean instead of sampling.
    pub deterministic: bool,
    /// Where to write per-step trajectories, if anywhere.
    pub trajectories: Option<PathBuf>,
    /// Worker threads; episodes are split among them by index.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 100,
            seed: 0,
            deterministic: true,
            trajectories: None,
            threads: thread::available_parallelism().map_or(1, usize::from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub reward: f64,
    pub steps: u32,
    pub waypoints_reached: u32,
    pub steps_to_first_waypoint: Option<u32>,
}

/// One row of the trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub step: u32,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub wp_x: f64,
    pub wp_y: f64,
    pub action_left: f64,
    pub action_right: f64,
    pub reward: f64,
    pub waypoints_reached: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    /// Fraction of episodes that captured at least one waypoint.
    pub success_rate: f64,
    /// Fraction that captured both.
    pub double_success_rate: f64,
    pub mean_reward: Option<f64>,
    /// Mean over successful episodes only.
    pub mean_steps_to_first_waypoint: Option<f64>,
    pub outcomes: Vec<EpisodeOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: Vec<EpisodeOutcome>) -> Self {
        let n = outcomes.len();
        let rate = |k: u32| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().filter(|o| o.waypoints_reached >= k).count() as f64 / n as f64
            }
        };
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Self {
            episodes: n,
            success_rate: rate(1),
            double_success_rate: rate(2),
            mean_reward: mean(outcomes.iter().map(|o| o.reward).collect()),
            mean_steps_to_first_waypoint: mean(
                outcomes
                    .iter()
                    .filter_map(|o| o.steps_to_first_waypoint.map(f64::from))
                    .collect(),
            ),
            outcomes,
        }
    }
}

fn run_episode(
    policy: &PolicyParams,
    env: &mut dyn Environment,
    index: usize,
    opts: &EvalOptions,
    rows: Option<&mut Vec<TrajectoryRow>>,
) -> Result<EpisodeOutcome, RunnerError> {
    let env_err = |e: crate::env::EnvError| RunnerError::Io(e.to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64 + 1);
    let mut obs = env.reset(Some(opts.seed.wrapping_add(index as u64))).map_err(env_err)?;
    let std: Vec<f64> = policy.log_std.iter().map(|s| s.exp()).collect();
    let mut out = EpisodeOutcome {
        reward: 0.0,
        steps: 0,
        waypoints_reached: 0,
        steps_to_first_waypoint: None,
    };
    let mut rows = rows;
    loop {
        let (mean, _) = policy.evaluate(&obs).map_err(|e| RunnerError::Config(e.to_string()))?;
        let action: Vec<f64> = if opts.deterministic {
            mean
        } else {
            mean.iter()
                .zip(&std)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let step = env.step(&action).map_err(env_err)?;
        out.reward += step.reward;
        out.steps += 1;
        let reached = step.info.get("waypoints_reached").copied().unwrap_or(0.0) as u32;
        if reached >= 1 && out.steps_to_first_waypoint.is_none() {
            out.steps_to_first_waypoint = Some(out.steps);
        }
        out.waypoints_reached = reached;
        if let Some(rows) = rows.as_deref_mut() {
            let get = |k: &str| step.info.get(k).copied().unwrap_or(f64::NAN);
            rows.push(TrajectoryRow {
                episode: index,
                step: out.steps,
                x: get("x"),
                y: get("y"),
                yaw: get("yaw"),
                wp_x: get("wp_x"),
                wp_y: get("wp_y"),
                action_left: action.first().copied().unwrap_or(f64::NAN),
                action_right: action.get(1).copied().unwrap_or(f64::NAN),
                reward: step.reward,
                waypoints_reached: get("waypoints_reached"),
            });
        }
        if step.done {
            return Ok(out);
        }
        obs = step.observation;
    }
}

type ChunkResult = Result<Vec<(EpisodeOutcome, Vec<TrajectoryRow>)>, RunnerError>;

type EnvFactory<'a> = dyn Fn() -> Result<Box<dyn Environment>, RunnerError> + Sync + 'a;

/// Runs `opts.episodes` episodes. Episode `i` resets with seed
/// `opts.seed + i`, so results do not depend on the thread count.
pub fn evaluate_policy(policy: &PolicyParams, make_env: &EnvFactory<'_>, opts: &EvalOptions) -> Result<EvalReport, RunnerError> {
    let n = opts.episodes;
    if n == 0 {
        if let Some(path) = &opts.trajectories {
            write_trajectories(path, &[])?;
        }
        return Ok(EvalReport::from_outcomes(Vec::new()));
    }
    let want_rows = opts.trajectories.is_some();
    let threads = opts.threads.clamp(1, n);
    let chunk = n.div_ceil(threads);

    let results: Vec<ChunkResult> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    let mut env = make_env()?;
                    let mut done = Vec::new();
                    for i in (t * chunk)..((t + 1) * chunk).min(n) {
                        let mut rows = Vec::new();
                        let outcome = run_episode(policy, env.as_mut(), i, opts, want_rows.then_some(&mut rows))?;
                        done.push((outcome, rows));
                    }
                    Ok(done)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });

    let mut outcomes = Vec::with_capacity(n);
    let mut rows = Vec::new();
    for r in results {
        for (o, mut rs) in r? {
            outcomes.push(o);
            rows.append(&mut rs);
        }
    }
    if let Some(path) = &opts.trajectories {
        write_trajectories(path, &rows)?;
    }
    Ok(EvalReport::from_outcomes(outcomes))
}

fn write_trajectories(path: &Path, rows: &[TrajectoryRow]) -> Result<(), RunnerError> {
    let err = |e: csv::Error| RunnerError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    if rows.is_empty() {
        w.write_record([
            "episode",
            "step",
            "x",
            "y",
            "yaw",
            "wp_x",
            "wp_y",
            "action_left",
            "action_right",
            "reward",
            "waypoints_reached",
        ])
        .map_err(err)?;
    }
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| RunnerError::Io(e.to_string()))
}

/// Loads `checkpoint` and evaluates it on the environment described by `config`.
pub fn evaluate(checkpoint: &Path, config: &RunConfig, opts: &EvalOptions) -> Result<EvalReport, RunnerError> {
    config.validate()?;
    let ck = load_checkpoint(checkpoint).map_err(RunnerError::from)?;
    let probe = config.make_env()?;
    let (actor, critic) = config.network_sizes(probe.observation_spec().dim(), probe.action_spec().dim());
    ck.expect_shapes(&actor, &critic).map_err(RunnerError::from)?;
    let mut opts = opts.clone();
    if config.bridge_connect.is_some() {
        // A bridge server takes one client at a time.
        opts.threads = 1;
        let probe = std::sync::Mutex::new(Some(probe));
        let factory = move || -> Result<Box<dyn Environment>, RunnerError> {
            probe
                .lock()
                .expect("probe lock")
                .take()
                .ok_or_else(|| RunnerError::Io("bridge environment already in use".into()))
        };
        return evaluate_policy(&ck.policy, &factory, &opts);
    }
    drop(probe);
    let factory = || config.make_env();
    evaluate_policy(&ck.policy, &factory, &opts)
}
