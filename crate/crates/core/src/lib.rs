//! Reinforcement learning for simulation-based training of rovers.
//!
//! The crate is split the way the platform is: a learning library
//! ([`nn`], [`ppo`]), a simulator ([`rover`], or any remote simulator via
//! [`bridge`]), and a task trainer ([`ppmc`] behind the [`env`] contract).
//! [`runner`] wires them together from a JSON run configuration.
//!
//! ```
//! use rlstar::env::Environment;
//! use rlstar::ppmc::{PpmcEnv, TaskConfig};
//! use rlstar::rover::RoverParams;
//!
//! let mut env = PpmcEnv::new(TaskConfig::default(), RoverParams::default(), 0).unwrap();
//! let obs = env.reset(Some(7)).unwrap();
//! assert_eq!(obs.len(), 9);
//! let step = env.step(&[1.0, 1.0]).unwrap();
//! assert!(step.reward.is_finite());
//! ```

pub mod bridge;
pub mod checkpoint;
pub mod env;
pub mod nn;
pub mod ppmc;
pub mod ppo;
pub mod rover;
pub mod runner;

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rover.md")]
    mod rover {}
    #[doc = include_str!("../../../book/src/task.md")]
    mod task {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/ppo.md")]
    mod ppo {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/bridge.md")]
    mod bridge {}
}
