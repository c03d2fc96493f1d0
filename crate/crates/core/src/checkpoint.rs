//! Binary checkpoint files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes   "RLSTAR01"
//! actor_len        u32       number of actor layer sizes
//! actor_sizes      u32 * actor_len
//! critic_len       u32
//! critic_sizes     u32 * critic_len
//! action_dim       u32
//! has_adam         u8        0 or 1
//! params           f64 * N   actor (per layer: weights row-major, then biases),
//!                            log_std, critic (same order as actor)
//! -- when has_adam == 1 --
//! adam_step        u64
//! beta1 beta2 eps  f64 * 3
//! m                f64 * N
//! v                f64 * N
//! ```
//!
//! Trailing bytes after the last field are rejected.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nn::{AdamState, MlpParams, ParamSet, PolicyParams};

pub const MAGIC: &[u8; 8] = b"RLSTAR01";

// Guards against absurd allocations from corrupted headers.
const MAX_LAYERS: u32 = 64;
const MAX_WIDTH: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O failed for {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("not a checkpoint file (magic {found:?})")]
    BadMagic { found: String },
    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    UnsupportedVersion { found: String, expected: String },
    #[error("checkpoint truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checkpoint header is inconsistent: {0}")]
    BadHeader(String),
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint holds a non-finite {0} value")]
    NonFinite(&'static str),
    #[error("checkpoint shape {found} does not match expected {expected}")]
    ShapeMismatch { found: String, expected: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyParams,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    /// Fails with `ShapeMismatch` unless both networks have the given layer sizes.
    pub fn expect_shapes(&self, actor: &[usize], critic: &[usize]) -> Result<(), CheckpointError> {
        let found = (self.policy.actor.layer_sizes(), self.policy.critic.layer_sizes());
        if found.0 != actor || found.1 != critic {
            return Err(CheckpointError::ShapeMismatch {
                found: format!("actor {:?} critic {:?}", found.0, found.1),
                expected: format!("actor {actor:?} critic {critic:?}"),
            });
        }
        Ok(())
    }
}

pub fn encode(policy: &PolicyParams, adam: Option<&AdamState>) -> Vec<u8> {
    let n = policy.num_params();
    let mut out = Vec::with_capacity(64 + 8 * n * if adam.is_some() { 3 } else { 1 });
    out.extend_from_slice(MAGIC);
    for sizes in [policy.actor.layer_sizes(), policy.critic.layer_sizes()] {
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(policy.act_dim() as u32).to_le_bytes());
    out.push(u8::from(adam.is_some()));
    for v in policy.slices().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(a) = adam {
        out.extend_from_slice(&a.step.to_le_bytes());
        for v in [a.beta1, a.beta2, a.eps].iter().chain(&a.m).chain(&a.v) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(CheckpointError::Truncated {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn fill(&mut self, dst: &mut [f64]) -> Result<(), CheckpointError> {
        let bytes = self.take(8 * dst.len())?;
        for (d, chunk) in dst.iter_mut().zip(bytes.chunks_exact(8)) {
            *d = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        Ok(())
    }

    fn sizes(&mut self, what: &str) -> Result<Vec<usize>, CheckpointError> {
        let len = self.u32()?;
        if !(2..=MAX_LAYERS).contains(&len) {
            return Err(CheckpointError::BadHeader(format!("{what} has {len} layer sizes")));
        }
        (0..len)
            .map(|_| {
                let s = self.u32()?;
                if s == 0 || s > MAX_WIDTH {
                    return Err(CheckpointError::BadHeader(format!("{what} layer width {s}")));
                }
                Ok(s as usize)
            })
            .collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(MAGIC.len()).map_err(|_| CheckpointError::BadMagic {
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != MAGIC {
        let found = String::from_utf8_lossy(magic).into_owned();
        return Err(if magic.starts_with(b"RLSTAR") {
            CheckpointError::UnsupportedVersion {
                found,
                expected: String::from_utf8_lossy(MAGIC).into_owned(),
            }
        } else {
            CheckpointError::BadMagic { found }
        });
    }
    let actor_sizes = r.sizes("actor")?;
    let critic_sizes = r.sizes("critic")?;
    let act_dim = r.u32()? as usize;
    if actor_sizes.last() != Some(&act_dim) {
        return Err(CheckpointError::BadHeader(format!(
            "action dim {act_dim} but actor output {:?}",
            actor_sizes.last()
        )));
    }
    if critic_sizes.last() != Some(&1) || critic_sizes[0] != actor_sizes[0] {
        return Err(CheckpointError::BadHeader(format!(
            "critic sizes {critic_sizes:?} incompatible with actor {actor_sizes:?}"
        )));
    }
    let has_adam = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(CheckpointError::BadHeader(format!("adam flag {other}"))),
    };

    // Check the payload length before allocating anything large.
    let n_actor: usize = actor_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let n_critic: usize = critic_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let n = n_actor + act_dim + n_critic;
    let payload = 8 * n + if has_adam { 8 * (4 + 2 * n) } else { 0 };
    let remaining = bytes.len() - r.pos;
    if remaining < payload {
        return Err(CheckpointError::Truncated {
            offset: r.pos,
            needed: payload - remaining,
        });
    }

    let actor = MlpParams::zeros(&actor_sizes).map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
    let critic = MlpParams::zeros(&critic_sizes).map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
    let mut policy = PolicyParams::from_parts(actor, vec![0.0; act_dim], critic)
        .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
    for s in policy.slices_mut() {
        r.fill(s)?;
    }
    if !policy.is_finite() {
        return Err(CheckpointError::NonFinite("parameter"));
    }
    let adam = if has_adam {
        let step = r.u64()?;
        let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
        let mut state = AdamState::with_hyperparams(n, beta1, beta2, eps);
        state.step = step;
        r.fill(&mut state.m)?;
        r.fill(&mut state.v)?;
        let scalars = [beta1, beta2, eps];
        if !scalars.iter().chain(&state.m).chain(&state.v).all(|v| v.is_finite()) {
            return Err(CheckpointError::NonFinite("optimizer"));
        }
        Some(state)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(Checkpoint { policy, adam })
}

pub fn save_checkpoint(policy: &PolicyParams, adam: Option<&AdamState>, path: &Path) -> Result<(), CheckpointError> {
    // Write-then-rename so an interrupted save never leaves a torn file.
    let tmp = path.with_extension("tmp");
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::write(&tmp, encode(policy, adam)).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
