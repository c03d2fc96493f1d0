//! Path planning and motion control (PPMC): drive the rover to two randomly
//! placed waypoints in turn.
//!
//! The agent sees nine normalized values, five about the rover and four about
//! the current waypoint, and controls the left and right motors with commands
//! in `[0, 1]`. Each step is rewarded for progress toward the waypoint and
//! penalized for time spent and for turning:
//!
//! ```text
//! reward = c_veloc * progress - c_alive - c_turn * |yaw_rate|
//! ```
//!
//! where `progress` is the decrease in distance to the waypoint over the step.
//! On the step that captures a waypoint the progress term is replaced by a
//! fixed 0.5 m bonus. The episode ends after the second capture or when the
//! time limit runs out.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ActionSpec, EnvError, Environment, Info, ObservationSpec, StepResult};
use crate::rover::{apply_motors, reset_rover, wrap_angle, InvalidRoverParam, RoverParams, RoverState};

/// Waypoints to capture before the episode ends.
pub const WAYPOINTS_PER_EPISODE: u32 = 2;

/// Length of the observation vector.
pub const OBS_DIM: usize = 9;

/// Number of motor commands.
pub const ACT_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn distance_from(&self, rover: &RoverState) -> f64 {
        (self.x - rover.x).hypot(self.y - rover.y)
    }
}

/// Draws a waypoint uniformly from the square `[-half_extent, half_extent]^2`.
pub fn sample_waypoint<R: Rng + ?Sized>(rng: &mut R, half_extent: f64) -> Waypoint {
    Waypoint {
        x: rng.gen_range(-half_extent..=half_extent),
        y: rng.gen_range(-half_extent..=half_extent),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConstants {
    /// Reward per meter of progress toward the waypoint.
    pub c_veloc: f64,
    /// Penalty paid every step.
    pub c_alive: f64,
    /// Penalty per rad/s of yaw rate.
    pub c_turn: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            c_veloc: 50.0,
            c_alive: 0.5,
            c_turn: 1.0,
        }
    }
}

/// Progress credited on the step that captures a waypoint, meters.
pub const GOAL_BONUS_PROGRESS: f64 = 0.5;

/// Per-step reward. When `goal_reached` the progress term is the fixed
/// capture bonus instead of `prev_distance - distance`.
pub fn compute_reward(
    prev_distance: f64,
    distance: f64,
    yaw_rate: f64,
    consts: &RewardConstants,
    goal_reached: bool,
) -> f64 {
    let progress = if goal_reached {
        GOAL_BONUS_PROGRESS
    } else {
        prev_distance - distance
    };
    consts.c_veloc * progress - consts.c_alive - consts.c_turn * yaw_rate.abs()
}

/// Closed interval mapped affinely onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRange {
    pub min: f64,
    pub max: f64,
}

impl NormRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// Maps `value` to `[-1, 1]`, clamping anything outside the range.
    pub fn normalize(&self, value: f64) -> f64 {
        (2.0 * (value - self.min) / (self.max - self.min) - 1.0).clamp(-1.0, 1.0)
    }
}

/// Expected `[min, max]` of each raw observation component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormRanges {
    pub x: NormRange,
    pub y: NormRange,
    pub v_forward: NormRange,
    pub v_lateral: NormRange,
    pub yaw: NormRange,
    pub angle_to_wp: NormRange,
    pub dist_to_wp: NormRange,
    pub wp_x: NormRange,
    pub wp_y: NormRange,
}

impl Default for NormRanges {
    fn default() -> Self {
        let grid = NormRange::new(-5.0, 5.0);
        // Motor-limited top speed of the physical rover.
        let speed = NormRange::new(-0.4, 0.4);
        let angle = NormRange::new(-PI, PI);
        Self {
            x: grid,
            y: grid,
            v_forward: speed,
            v_lateral: speed,
            yaw: angle,
            angle_to_wp: angle,
            dist_to_wp: NormRange::new(0.0, 10.0 * std::f64::consts::SQRT_2),
            wp_x: grid,
            wp_y: grid,
        }
    }
}

impl NormRanges {
    fn iter(&self) -> [(&'static str, NormRange); OBS_DIM] {
        [
            ("x", self.x),
            ("y", self.y),
            ("v_forward", self.v_forward),
            ("v_lateral", self.v_lateral),
            ("yaw", self.yaw),
            ("angle_to_wp", self.angle_to_wp),
            ("dist_to_wp", self.dist_to_wp),
            ("wp_x", self.wp_x),
            ("wp_y", self.wp_y),
        ]
    }
}

/// Normalized observation, in this order: rover x, rover y, forward speed,
/// lateral speed, yaw, bearing to the waypoint relative to the heading,
/// distance to the waypoint, waypoint x, waypoint y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn angle_to_wp(&self) -> f64 {
        self.0[5]
    }

    pub fn dist_to_wp(&self) -> f64 {
        self.0[6]
    }
}

/// Bearing of `wp` as seen from the rover, relative to its heading, in `(-pi, pi]`.
pub fn angle_to_waypoint(rover: &RoverState, wp: &Waypoint) -> f64 {
    wrap_angle((wp.y - rover.y).atan2(wp.x - rover.x) - rover.yaw)
}

pub fn build_observation(rover: &RoverState, wp: &Waypoint, ranges: &NormRanges) -> Observation {
    let raw = [
        rover.x,
        rover.y,
        rover.v_forward,
        rover.v_lateral,
        rover.yaw,
        angle_to_waypoint(rover, wp),
        wp.distance_from(rover),
        wp.x,
        wp.y,
    ];
    let mut out = [0.0; OBS_DIM];
    for ((o, r), (_, range)) in out.iter_mut().zip(raw).zip(ranges.iter()) {
        *o = range.normalize(r);
    }
    Observation(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Waypoints are drawn from `[-grid_half_extent, grid_half_extent]^2`.
    pub grid_half_extent: f64,
    /// A waypoint counts as captured within this distance, meters.
    pub goal_radius: f64,
    /// Maximum steps per episode.
    pub time_limit: u32,
    pub reward: RewardConstants,
    pub normalization: NormRanges,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            grid_half_extent: 5.0,
            goal_radius: 0.5,
            time_limit: 1000,
            reward: RewardConstants::default(),
            normalization: NormRanges::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskConfigError {
    #[error("task setting `{name}` is invalid: {value}")]
    Invalid { name: String, value: f64 },
    #[error(transparent)]
    Rover(#[from] InvalidRoverParam),
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), TaskConfigError> {
        let invalid = |name: &str, value: f64| TaskConfigError::Invalid {
            name: name.to_owned(),
            value,
        };
        if !(self.grid_half_extent.is_finite() && self.grid_half_extent > 0.0) {
            return Err(invalid("grid_half_extent", self.grid_half_extent));
        }
        if !(self.goal_radius.is_finite() && self.goal_radius > 0.0) {
            return Err(invalid("goal_radius", self.goal_radius));
        }
        if self.time_limit == 0 {
            return Err(invalid("time_limit", 0.0));
        }
        let r = &self.reward;
        for (name, value) in [
            ("reward.c_veloc", r.c_veloc),
            ("reward.c_alive", r.c_alive),
            ("reward.c_turn", r.c_turn),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(name, value));
            }
        }
        for (name, range) in self.normalization.iter() {
            if !(range.min.is_finite() && range.max.is_finite() && range.min < range.max) {
                return Err(invalid(&format!("normalization.{name}.max"), range.max));
            }
        }
        Ok(())
    }
}

/// Per-episode bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub current_waypoint: Waypoint,
    pub waypoints_reached: u32,
    pub step_count: u32,
    /// Distance to the current waypoint at the end of the previous step.
    pub prev_distance: f64,
}

impl EpisodeState {
    pub fn new(rover: &RoverState, waypoint: Waypoint) -> Self {
        Self {
            current_waypoint: waypoint,
            waypoints_reached: 0,
            step_count: 0,
            prev_distance: waypoint.distance_from(rover),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Termination {
    pub done: bool,
    pub goal_reached: bool,
}

/// Applies the capture and time-limit rules after a step.
///
/// `ep.step_count` must already include the step just taken. On a capture
/// that is not the last one, a fresh waypoint is drawn and `prev_distance` is
/// rebased to the rover's distance from it, so the next step's progress is
/// measured against the new target.
pub fn check_termination<R: Rng + ?Sized>(
    ep: &mut EpisodeState,
    distance: f64,
    rover: &RoverState,
    cfg: &TaskConfig,
    rng: &mut R,
) -> Termination {
    let goal_reached = distance <= cfg.goal_radius;
    let mut done = ep.step_count >= cfg.time_limit;
    if goal_reached {
        ep.waypoints_reached += 1;
        if ep.waypoints_reached >= WAYPOINTS_PER_EPISODE {
            done = true;
        } else {
            ep.current_waypoint = sample_waypoint(rng, cfg.grid_half_extent);
            ep.prev_distance = ep.current_waypoint.distance_from(rover);
        }
    }
    Termination { done, goal_reached }
}

/// The PPMC task bound to the built-in rover simulator.
#[derive(Debug, Clone)]
pub struct PpmcEnv {
    task: TaskConfig,
    rover_params: RoverParams,
    action_spec: ActionSpec,
    observation_spec: ObservationSpec,
    rng: ChaCha8Rng,
    rover: RoverState,
    episode: Option<EpisodeState>,
    done: bool,
    clamped_actions: u32,
}

impl PpmcEnv {
    pub fn new(task: TaskConfig, rover_params: RoverParams, seed: u64) -> Result<Self, TaskConfigError> {
        task.validate()?;
        rover_params.validate()?;
        Ok(Self {
            task,
            rover_params,
            action_spec: ActionSpec::new(vec![0.0; ACT_DIM], vec![1.0; ACT_DIM])
                .expect("static action bounds"),
            observation_spec: ObservationSpec::symmetric_unit(OBS_DIM).expect("static observation bounds"),
            rng: ChaCha8Rng::seed_from_u64(seed),
            rover: RoverState::default(),
            episode: None,
            done: false,
            clamped_actions: 0,
        })
    }

    pub fn task(&self) -> &TaskConfig {
        &self.task
    }

    pub fn rover_params(&self) -> &RoverParams {
        &self.rover_params
    }

    pub fn rover(&self) -> &RoverState {
        &self.rover
    }

    pub fn episode(&self) -> Option<&EpisodeState> {
        self.episode.as_ref()
    }

    pub fn observe(&self) -> Option<Observation> {
        self.episode
            .map(|ep| build_observation(&self.rover, &ep.current_waypoint, &self.task.normalization))
    }
}

impl Environment for PpmcEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.action_spec
    }

    fn observation_spec(&self) -> &ObservationSpec {
        &self.observation_spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        // Uniform on (-pi, pi].
        let yaw = PI - 2.0 * PI * self.rng.gen::<f64>();
        self.rover = reset_rover(yaw);
        let wp = sample_waypoint(&mut self.rng, self.task.grid_half_extent);
        let ep = EpisodeState::new(&self.rover, wp);
        self.episode = Some(ep);
        self.done = false;
        self.clamped_actions = 0;
        Ok(build_observation(&self.rover, &wp, &self.task.normalization).0.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != ACT_DIM {
            return Err(EnvError::ActionDimensionMismatch {
                expected: ACT_DIM,
                got: action.len(),
            });
        }
        let Some(mut ep) = self.episode else {
            return Err(EnvError::NotReset);
        };
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }

        let mut command = [action[0], action[1]];
        self.clamped_actions += self.action_spec.clamp(&mut command) as u32;
        self.rover = apply_motors(&self.rover, command, &self.rover_params);
        ep.step_count += 1;

        let distance = ep.current_waypoint.distance_from(&self.rover);
        let prev_distance = ep.prev_distance;
        ep.prev_distance = distance;
        let wp_before = ep.current_waypoint;
        let term = check_termination(&mut ep, distance, &self.rover, &self.task, &mut self.rng);
        let reward = compute_reward(
            prev_distance,
            distance,
            self.rover.yaw_rate,
            &self.task.reward,
            term.goal_reached,
        );

        self.episode = Some(ep);
        self.done = term.done;

        let obs = build_observation(&self.rover, &ep.current_waypoint, &self.task.normalization);
        let mut info = Info::new();
        info.insert("progress".into(), prev_distance - distance);
        info.insert("yaw_rate".into(), self.rover.yaw_rate);
        info.insert("distance_to_goal".into(), ep.current_waypoint.distance_from(&self.rover));
        info.insert("goal_reached".into(), f64::from(u8::from(term.goal_reached)));
        info.insert("waypoints_reached".into(), f64::from(ep.waypoints_reached));
        info.insert("clamped_actions".into(), f64::from(self.clamped_actions));
        info.insert("steps".into(), f64::from(ep.step_count));
        info.insert("x".into(), self.rover.x);
        info.insert("y".into(), self.rover.y);
        info.insert("yaw".into(), self.rover.yaw);
        info.insert("wp_x".into(), wp_before.x);
        info.insert("wp_y".into(), wp_before.y);

        Ok(StepResult {
            observation: obs.0.to_vec(),
            reward,
            done: term.done,
            info,
        })
    }
}
