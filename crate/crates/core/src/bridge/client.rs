use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{encode_line, Request, Response, PROTOCOL_VERSION};
use super::BridgeError;
use crate::env::{ActionSpec, EnvError, Environment, ObservationSpec, StepResult};

pub const DEFAULT_READ_TIMEOUT: Duration = Duration::from_secs(30);

/// An environment living behind a bridge server.
#[derive(Debug)]
pub struct RemoteEnv {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    action_spec: ActionSpec,
    observation_spec: ObservationSpec,
}

impl RemoteEnv {
    pub fn connect<A: ToSocketAddrs>(addr: A, read_timeout: Duration) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(addr).map_err(|e| BridgeError::Connect(e.to_string()))?;
        stream
            .set_read_timeout(Some(read_timeout))
            .and_then(|_| stream.set_nodelay(true))
            .map_err(|e| BridgeError::Connect(e.to_string()))?;
        let writer = stream.try_clone().map_err(|e| BridgeError::Connect(e.to_string()))?;
        let mut reader = BufReader::new(stream);
        let mut writer_ref = writer;
        let reply = round_trip(&mut reader, &mut writer_ref, &Request::Spec)?;
        let Response::Spec {
            obs_dim,
            act_dim,
            act_low,
            act_high,
            protocol_version,
            obs_low,
            obs_high,
        } = reply
        else {
            return Err(unexpected("spec", &reply));
        };
        if protocol_version != PROTOCOL_VERSION {
            return Err(BridgeError::ProtocolVersionMismatch {
                local: PROTOCOL_VERSION,
                remote: protocol_version,
            });
        }
        if act_low.len() != act_dim {
            return Err(BridgeError::Protocol(format!(
                "spec declares act_dim {act_dim} with {} bounds",
                act_low.len()
            )));
        }
        let action_spec = ActionSpec::new(act_low, act_high).map_err(|e| BridgeError::Protocol(e.to_string()))?;
        let observation_spec = ObservationSpec::new(
            obs_low.unwrap_or_else(|| vec![-1.0; obs_dim]),
            obs_high.unwrap_or_else(|| vec![1.0; obs_dim]),
        )
        .map_err(|e| BridgeError::Protocol(e.to_string()))?;
        if observation_spec.dim() != obs_dim {
            return Err(BridgeError::Protocol(format!(
                "spec declares obs_dim {obs_dim} with {} bounds",
                observation_spec.dim()
            )));
        }
        Ok(Self {
            reader,
            writer: writer_ref,
            action_spec,
            observation_spec,
        })
    }

    fn request(&mut self, req: &Request) -> Result<Response, BridgeError> {
        round_trip(&mut self.reader, &mut self.writer, req)
    }
}

fn round_trip(reader: &mut BufReader<TcpStream>, writer: &mut TcpStream, req: &Request) -> Result<Response, BridgeError> {
    let io_err = |e: io::Error| match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => BridgeError::Connect("read timed out".into()),
        _ => BridgeError::Connect(e.to_string()),
    };
    writer.write_all(encode_line(req).as_bytes()).map_err(io_err)?;
    writer.flush().map_err(io_err)?;
    let mut line = String::new();
    if reader.read_line(&mut line).map_err(io_err)? == 0 {
        return Err(BridgeError::Connect("server closed the connection".into()));
    }
    let resp: Response =
        serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Protocol(format!("bad response: {e}")))?;
    if let Response::Error { code, message } = resp {
        return Err(BridgeError::Remote { code, message });
    }
    Ok(resp)
}

fn unexpected(wanted: &str, got: &Response) -> BridgeError {
    BridgeError::Protocol(format!("expected a {wanted} response, got {got:?}"))
}

impl Environment for RemoteEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.action_spec
    }

    fn observation_spec(&self) -> &ObservationSpec {
        &self.observation_spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        match self.request(&Request::Reset { seed })? {
            Response::Obs { observation } => Ok(observation),
            other => Err(unexpected("obs", &other).into()),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != self.action_spec.dim() {
            return Err(EnvError::ActionDimensionMismatch {
                expected: self.action_spec.dim(),
                got: action.len(),
            });
        }
        let req = Request::Step {
            action: action.to_vec(),
        };
        match self.request(&req)? {
            Response::Transition {
                observation,
                reward,
                done,
                info,
            } => Ok(StepResult {
                observation,
                reward,
                done,
                info,
            }),
            other => Err(unexpected("transition", &other).into()),
        }
    }
}

/// Connects to a bridge server with the default read timeout.
pub fn remote_environment<A: ToSocketAddrs>(addr: A) -> Result<RemoteEnv, BridgeError> {
    RemoteEnv::connect(addr, DEFAULT_READ_TIMEOUT)
}
