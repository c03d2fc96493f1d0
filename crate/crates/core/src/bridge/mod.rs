//! Newline-delimited JSON bridge between a learner and a simulator.
//!
//! A [`BridgeServer`] exposes any [`Environment`](crate::env::Environment)
//! over TCP; a [`RemoteEnv`] is an environment whose every call is forwarded
//! to such a server. Each message is one JSON object on one line. The client
//! sends `spec`, `reset` or `step`; the server answers with `spec`, `obs`,
//! `transition` or `error`. The session grammar is
//! `spec* (reset step*)*`; anything else is answered with an `error` and the
//! connection is closed.

mod client;
mod protocol;
mod server;

pub use client::{remote_environment, RemoteEnv, DEFAULT_READ_TIMEOUT};
pub use protocol::{codes, encode_line, Request, Response, PROTOCOL_VERSION};
pub use server::{serve, BridgeServer, SessionEnd};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bridge connection failed: {0}")]
    Connect(String),
    #[error("protocol version mismatch: client speaks {local}, server speaks {remote}")]
    ProtocolVersionMismatch { local: u32, remote: u32 },
    #[error("server reported {code}: {message}")]
    Remote { code: String, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
}
