use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};

use log::{info, warn};

use super::protocol::{codes, encode_line, Request, Response, PROTOCOL_VERSION};
use crate::env::{EnvError, Environment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Only spec queries and resets are legal.
    Handshake,
    Episode,
}

/// Why a client session ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEnd {
    Disconnected,
    /// The client broke the protocol; the error code that was sent back.
    ProtocolError(String),
}

/// Serves one environment to one client at a time over TCP.
pub struct BridgeServer<E> {
    env: E,
    listener: TcpListener,
}

impl<E: Environment> BridgeServer<E> {
    pub fn bind<A: ToSocketAddrs>(env: E, addr: A) -> io::Result<Self> {
        Ok(Self {
            env,
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    /// Accepts clients forever, one after another.
    pub fn serve_forever(&mut self) -> io::Result<()> {
        loop {
            match self.serve_one() {
                Ok(end) => info!("client session ended: {end:?}"),
                Err(e) => warn!("client session failed: {e}"),
            }
        }
    }

    /// Accepts and serves a single client until it disconnects or breaks the
    /// protocol, then resets the environment for the next client.
    pub fn serve_one(&mut self) -> io::Result<SessionEnd> {
        let (stream, peer) = self.listener.accept()?;
        info!("bridge client connected from {peer}");
        let result = self.handle(stream);
        // The next client always starts from a clean episode.
        if let Err(e) = self.env.reset(None) {
            warn!("environment reset after session failed: {e}");
        }
        result
    }

    fn handle(&mut self, stream: TcpStream) -> io::Result<SessionEnd> {
        stream.set_nodelay(true)?;
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        let mut phase = Phase::Handshake;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Ok(SessionEnd::Disconnected);
            }
            let reply = match serde_json::from_str::<Request>(line.trim_end()) {
                Err(e) => error(codes::PARSE, format!("malformed request: {e}")),
                Ok(req) => self.dispatch(req, &mut phase),
            };
            writer.write_all(encode_line(&reply).as_bytes())?;
            writer.flush()?;
            if let Response::Error { code, .. } = reply {
                return Ok(SessionEnd::ProtocolError(code));
            }
        }
    }

    fn dispatch(&mut self, req: Request, phase: &mut Phase) -> Response {
        match req {
            Request::Spec if *phase == Phase::Handshake => {
                let a = self.env.action_spec();
                let o = self.env.observation_spec();
                Response::Spec {
                    obs_dim: o.dim(),
                    act_dim: a.dim(),
                    act_low: a.low().to_vec(),
                    act_high: a.high().to_vec(),
                    protocol_version: PROTOCOL_VERSION,
                    obs_low: Some(o.low().to_vec()),
                    obs_high: Some(o.high().to_vec()),
                }
            }
            Request::Spec => error(codes::OUT_OF_ORDER, "spec is only answered before the first reset".into()),
            Request::Reset { seed } => match self.env.reset(seed) {
                Ok(observation) => {
                    *phase = Phase::Episode;
                    Response::Obs { observation }
                }
                Err(e) => env_error(e),
            },
            Request::Step { .. } if *phase == Phase::Handshake => {
                error(codes::NOT_RESET, "step received before any reset".into())
            }
            Request::Step { action } => match self.env.step(&action) {
                Ok(s) => Response::Transition {
                    observation: s.observation,
                    reward: s.reward,
                    done: s.done,
                    info: s.info,
                },
                Err(e) => env_error(e),
            },
        }
    }
}

fn error(code: &str, message: String) -> Response {
    Response::Error {
        code: code.to_owned(),
        message,
    }
}

fn env_error(e: EnvError) -> Response {
    let code = match e {
        EnvError::ActionDimensionMismatch { .. } => codes::ACTION_DIM,
        EnvError::EpisodeFinished => codes::EPISODE_FINISHED,
        EnvError::NotReset => codes::NOT_RESET,
        EnvError::Bridge(_) => codes::ENV,
    };
    error(code, e.to_string())
}

/// Binds `addr` and serves `env` to successive clients until an accept fails.
pub fn serve<E: Environment, A: ToSocketAddrs>(env: E, addr: A) -> io::Result<()> {
    let mut server = BridgeServer::bind(env, addr)?;
    info!("bridge listening on {}", server.local_addr()?);
    server.serve_forever()
}
