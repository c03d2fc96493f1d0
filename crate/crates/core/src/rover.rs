//! Planar kinematic model of a two-wheel-drive skid-steer rover on flat ground.
//!
//! Each side has one driven motor. A command in `[0, 1]` on a side maps to a
//! ground speed of `command * max_wheel_speed * action_multiplier` for that
//! side. The body moves at the mean of the two side speeds and turns at their
//! difference divided by the track width. There is no slip, so the lateral
//! velocity is always zero. Pose is integrated with explicit Euler.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = (angle + PI).rem_euclid(two_pi) - PI;
    // rem_euclid lands in [0, 2pi), so the raw result is in [-pi, pi).
    if a <= -PI {
        a += two_pi;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoverParams {
    /// Distance between left and right wheel contact lines, meters.
    pub track_width: f64,
    /// Side ground speed at a command of 1.0, before the multiplier, m/s.
    pub max_wheel_speed: f64,
    pub action_multiplier: f64,
    /// Control period, seconds.
    pub dt: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            track_width: 0.3,
            max_wheel_speed: 0.1,
            action_multiplier: 2.0,
            dt: 0.05,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("rover parameter `{name}` must be finite and positive, got {value}")]
pub struct InvalidRoverParam {
    pub name: &'static str,
    pub value: f64,
}

impl RoverParams {
    pub fn validate(&self) -> Result<(), InvalidRoverParam> {
        for (name, value) in [
            ("track_width", self.track_width),
            ("max_wheel_speed", self.max_wheel_speed),
            ("action_multiplier", self.action_multiplier),
            ("dt", self.dt),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(InvalidRoverParam { name, value });
            }
        }
        Ok(())
    }

    /// Top body speed, reached with both commands at 1.
    pub fn max_speed(&self) -> f64 {
        self.max_wheel_speed * self.action_multiplier
    }

    /// Largest yaw rate magnitude, reached with one side at 1 and the other at 0.
    pub fn max_yaw_rate(&self) -> f64 {
        self.max_speed() / self.track_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoverState {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`, zero along +x.
    pub yaw: f64,
    /// Body-frame forward speed.
    pub v_forward: f64,
    /// Body-frame lateral speed; zero for this model.
    pub v_lateral: f64,
    pub yaw_rate: f64,
}

/// Rover at rest at the origin with the given heading.
pub fn reset_rover(seed_yaw: f64) -> RoverState {
    RoverState {
        yaw: wrap_angle(seed_yaw),
        ..RoverState::default()
    }
}

/// Advances `state` by one control period under motor commands
/// `[left, right]`. Commands are expected in `[0, 1]`; the caller clamps.
pub fn apply_motors(state: &RoverState, action: [f64; 2], params: &RoverParams) -> RoverState {
    let scale = params.max_wheel_speed * params.action_multiplier;
    let v_left = action[0] * scale;
    let v_right = action[1] * scale;
    let v_forward = 0.5 * (v_left + v_right);
    let yaw_rate = (v_right - v_left) / params.track_width;
    let dt = params.dt;
    RoverState {
        x: state.x + v_forward * state.yaw.cos() * dt,
        y: state.y + v_forward * state.yaw.sin() * dt,
        yaw: wrap_angle(state.yaw + yaw_rate * dt),
        v_forward,
        v_lateral: 0.0,
        yaw_rate,
    }
}
