use serde::{Deserialize, Serialize};

use crate::env::Info;

pub const PROTOCOL_VERSION: u32 = 1;

/// Client to server. One JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Spec,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Step {
        action: Vec<f64>,
    },
}

/// Server to client. One JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Spec {
        obs_dim: usize,
        act_dim: usize,
        act_low: Vec<f64>,
        act_high: Vec<f64>,
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obs_low: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obs_high: Option<Vec<f64>>,
    },
    Obs {
        observation: Vec<f64>,
    },
    Transition {
        observation: Vec<f64>,
        reward: f64,
        done: bool,
        info: Info,
    },
    Error {
        code: String,
        message: String,
    },
}

/// Error codes carried by [`Response::Error`].
pub mod codes {
    pub const PARSE: &str = "parse";
    pub const NOT_RESET: &str = "not_reset";
    pub const OUT_OF_ORDER: &str = "out_of_order";
    pub const EPISODE_FINISHED: &str = "episode_finished";
    pub const ACTION_DIM: &str = "action_dim";
    pub const ENV: &str = "env";
}

/// Serializes `msg` as a single newline-terminated line.
pub fn encode_line<T: Serialize>(msg: &T) -> String {
    let mut line = serde_json::to_string(msg).expect("protocol messages always serialize");
    line.push('\n');
    line
}
