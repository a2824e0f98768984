use std::net::TcpStream;

use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::messages::*;
use super::ProtocolError;
use crate::geom::Vec2;
use crate::metrics::EpisodeLog;
use crate::task::{Agent, AgentAction};

/// What a client saw of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientOutcome {
    pub hello: Hello,
    pub observations: Vec<Observation>,
    pub errors: Vec<AckError>,
    pub end: Option<EpisodeEnd>,
    /// Log rebuilt from observations and the closing message; `None` when
    /// the connection dropped before the episode ended.
    pub log: Option<EpisodeLog>,
    /// The session ended without an `episode_end`.
    pub partial: bool,
}

impl ClientOutcome {
    /// Agent positions as observed, tick by tick.
    pub fn observed_trajectory(&self) -> Vec<Vec2> {
        self.observations.iter().map(|o| o.pose.position()).collect()
    }
}

/// Adapts a closure to the [`Agent`] interface.
pub struct FnAgent<F>(pub F);

impl<F: FnMut(&Observation) -> AgentAction> Agent for FnAgent<F> {
    fn begin(&mut self, _hello: &Hello) {}

    fn act(&mut self, obs: &Observation) -> AgentAction {
        (self.0)(obs)
    }
}

fn read_message(ws: &mut WebSocket<MaybeTlsStream<TcpStream>>) -> Result<Option<WireMessage>, ProtocolError> {
    loop {
        match ws.read() {
            Ok(Message::Text(t)) => return Ok(Some(serde_json::from_str(t.as_str())?)),
            Ok(Message::Close(_)) => return Ok(None),
            Ok(_) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(None),
            Err(tungstenite::Error::Io(e)) if e.kind() == std::io::ErrorKind::ConnectionReset => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
}

fn rebuild_log(observations: &[Observation], end: &EpisodeEnd) -> EpisodeLog {
    let ndi_events = observations
        .iter()
        .filter(|o| o.tick > 0 && o.instruction.is_some())
        .map(|o| o.tick - 1)
        .collect();
    EpisodeLog {
        trajectory: observations.iter().map(|o| o.pose.position()).collect(),
        ndi_events,
        ..end.log.clone()
    }
}

/// Drive one lockstep session at `url` with `agent`.
pub fn client_session(url: &str, agent: &mut dyn Agent) -> Result<ClientOutcome, ProtocolError> {
    let (mut ws, _) = tungstenite::connect(url).map_err(|e| ProtocolError::Connect(e.to_string()))?;
    let hello = match read_message(&mut ws)? {
        Some(WireMessage::Hello(h)) => h,
        Some(other) => return Err(ProtocolError::Unexpected(format!("expected hello, got {other:?}"))),
        None => return Err(ProtocolError::Unexpected("connection closed before hello".into())),
    };
    agent.begin(&hello);
    let mut observations = Vec::new();
    let mut errors = Vec::new();
    let mut end = None;
    loop {
        let msg = match read_message(&mut ws) {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                log::warn!("session with {url} broke: {e}");
                break;
            }
        };
        match msg {
            WireMessage::Observation(obs) => {
                let done = obs.done;
                let tick = obs.tick;
                if !done {
                    let cmd = agent.act(&obs);
                    let action = WireMessage::Action(ActionMsg {
                        protocol_version: PROTOCOL_VERSION,
                        episode_id: hello.episode_id.clone(),
                        tick,
                        cmd,
                    });
                    observations.push(obs);
                    if ws.send(Message::text(action.to_json())).is_err() {
                        break;
                    }
                } else {
                    observations.push(obs);
                }
            }
            WireMessage::AckError(e) => {
                log::warn!("server rejected a message: {} ({})", e.code, e.detail);
                errors.push(e);
            }
            WireMessage::EpisodeEnd(e) => {
                end = Some(e);
                break;
            }
            other => return Err(ProtocolError::Unexpected(format!("unexpected {other:?}"))),
        }
    }
    let _ = ws.close(None);
    let log = end.as_ref().map(|e| rebuild_log(&observations, e));
    Ok(ClientOutcome { hello, observations, errors, partial: end.is_none(), end, log })
}
