//! Lockstep WebSocket protocol: one observation out, one action in, per tick.

mod client;
mod messages;
mod server;

use thiserror::Error;

pub use client::{client_session, ClientOutcome, FnAgent};
pub use messages::{
    build_hello, codes, nearby_world_position, observe, AckError, ActionMsg, EpisodeEnd, Hello, HelloPoi, HelloScene,
    Nearby, NearbyKind, Observation, RoadGeometry, WireMessage, MIN_RAY_M, PROTOCOL_VERSION, RAY_COUNT,
};
pub use server::{serve, Server, ServerConfig};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    WebSocket(Box<tungstenite::Error>),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("cannot connect: {0}")]
    Connect(String),
    #[error("bad message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("protocol violation: {0}")]
    Unexpected(String),
    #[error(transparent)]
    Task(#[from] crate::task::TaskError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

impl From<tungstenite::Error> for ProtocolError {
    fn from(e: tungstenite::Error) -> Self {
        ProtocolError::WebSocket(Box::new(e))
    }
}
