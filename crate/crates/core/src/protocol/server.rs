use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tungstenite::handshake::server::{Request, Response};
use tungstenite::{Message, WebSocket};

use super::messages::*;
use super::ProtocolError;
use crate::inquiry::InstructionProvider;
use crate::metrics::episode_metrics;
use crate::recorder::Recorder;
use crate::task::{sample_episode, start_episode, AgentAction, Episode, EpisodeConfig, EpisodeSink, EpisodeStatus, World};

const POLL: Duration = Duration::from_millis(25);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Episode seed when the client does not pass `?seed=N`.
    pub seed: u64,
    pub episode: EpisodeConfig,
    pub action_timeout: Duration,
    /// Minimum wall time between observations, for human play.
    pub pace: Option<Duration>,
    pub runs_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: 8765,
            seed: 0,
            episode: EpisodeConfig::default(),
            action_timeout: Duration::from_secs(60),
            pace: None,
            runs_dir: None,
        }
    }
}

/// Handle to a running service.
pub struct Server {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Stop accepting, abort live sessions (their archives are finalized) and wait.
    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    /// Block until the shutdown flag is raised and every session finished.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn serve(
    world: Arc<World>,
    cfg: ServerConfig,
    provider: Arc<dyn InstructionProvider>,
) -> Result<Server, ProtocolError> {
    let listener = TcpListener::bind((cfg.bind.as_str(), cfg.port))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&shutdown);
    let cfg = Arc::new(cfg);
    let handle = std::thread::spawn(move || {
        let mut sessions: Vec<JoinHandle<()>> = Vec::new();
        while !flag.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let (world, cfg, provider, flag) =
                        (Arc::clone(&world), Arc::clone(&cfg), Arc::clone(&provider), Arc::clone(&flag));
                    sessions.push(std::thread::spawn(move || {
                        if let Err(e) = run_session(stream, &world, &cfg, provider.as_ref(), &flag) {
                            log::warn!("session with {peer} failed: {e}");
                        }
                    }));
                    sessions.retain(|h| !h.is_finished());
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(e) => {
                    log::error!("accept failed: {e}");
                    std::thread::sleep(POLL);
                }
            }
        }
        for h in sessions {
            let _ = h.join();
        }
    });
    Ok(Server { addr, shutdown, handle: Some(handle) })
}

fn seed_from_query(query: Option<&str>) -> Option<u64> {
    query?.split('&').find_map(|kv| kv.strip_prefix("seed=")).and_then(|v| v.parse().ok())
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &WireMessage) -> Result<(), ProtocolError> {
    ws.send(Message::text(msg.to_json()))?;
    Ok(())
}

fn ack(ws: &mut WebSocket<TcpStream>, ep: &Episode, code: &str, detail: String) -> Result<(), ProtocolError> {
    log::debug!("{}: ack_error {code}: {detail}", ep.id);
    send(
        ws,
        &WireMessage::AckError(AckError {
            protocol_version: PROTOCOL_VERSION,
            episode_id: ep.id.clone(),
            code: code.into(),
            detail,
        }),
    )
}

enum Awaited {
    Action(AgentAction),
    End(EpisodeStatus),
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn await_action(
    ws: &mut WebSocket<TcpStream>,
    ep: &Episode,
    timeout: Duration,
    shutdown: &AtomicBool,
) -> Result<Awaited, ProtocolError> {
    let deadline = Instant::now() + timeout;
    loop {
        if shutdown.load(Ordering::SeqCst) {
            return Ok(Awaited::End(EpisodeStatus::Aborted));
        }
        if Instant::now() >= deadline {
            return Ok(Awaited::End(EpisodeStatus::Timeout));
        }
        let text = match ws.read() {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Binary(_)) => {
                ack(ws, ep, codes::MALFORMED, "binary frames are not accepted".into())?;
                continue;
            }
            Ok(Message::Close(_)) => return Ok(Awaited::End(EpisodeStatus::Aborted)),
            Ok(_) => continue,
            Err(e) if is_timeout(&e) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(Awaited::End(EpisodeStatus::Aborted))
            }
            Err(e) => {
                log::warn!("{}: read failed: {e}", ep.id);
                return Ok(Awaited::End(EpisodeStatus::Aborted));
            }
        };
        let a = match serde_json::from_str::<WireMessage>(&text) {
            Ok(WireMessage::Action(a)) => a,
            Ok(_) => {
                ack(ws, ep, codes::UNEXPECTED, "only action messages are accepted".into())?;
                continue;
            }
            Err(e) => {
                ack(ws, ep, codes::MALFORMED, e.to_string())?;
                continue;
            }
        };
        if a.protocol_version != PROTOCOL_VERSION {
            ack(ws, ep, codes::BAD_VERSION, format!("expected protocol_version {PROTOCOL_VERSION}"))?;
        } else if a.episode_id != ep.id {
            ack(ws, ep, codes::EPISODE_MISMATCH, format!("this session runs {}", ep.id))?;
        } else if a.tick != ep.tick {
            ack(ws, ep, codes::TICK_MISMATCH, format!("expected tick {}, got {}", ep.tick, a.tick))?;
        } else {
            return Ok(Awaited::Action(a.cmd));
        }
    }
}

/// Finish the close handshake so the peer sees every frame before the socket drops.
fn drain(ws: &mut WebSocket<TcpStream>) {
    let deadline = Instant::now() + Duration::from_secs(1);
    while Instant::now() < deadline {
        match ws.read() {
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(_) => break,
        }
    }
}

fn run_session(
    stream: TcpStream,
    world: &World,
    cfg: &ServerConfig,
    provider: &dyn InstructionProvider,
    shutdown: &AtomicBool,
) -> Result<(), ProtocolError> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut seed = cfg.seed;
    let mut ws = tungstenite::accept_hdr(stream, |req: &Request, resp: Response| {
        if let Some(s) = seed_from_query(req.uri().query()) {
            seed = s;
        }
        Ok(resp)
    })
    .map_err(|e| ProtocolError::Handshake(e.to_string()))?;
    ws.get_mut().set_read_timeout(Some(POLL))?;

    let spec = sample_episode(world, seed, &cfg.episode)?;
    let mut ep = start_episode(world, &spec, &cfg.episode, provider)?;
    log::info!("{}: session started", ep.id);
    let mut recorder = cfg.runs_dir.as_ref().map(Recorder::new);
    if let Some(r) = recorder.as_mut() {
        r.begin(world, &ep);
        r.frame(&ep.frame());
    }
    send(&mut ws, &WireMessage::Hello(build_hello(world, &ep)))?;

    let mut sent_tick = None;
    let mut last_sent = Instant::now();
    let result = loop {
        if sent_tick != Some(ep.tick) {
            if let Some(p) = cfg.pace {
                let wait = p.saturating_sub(last_sent.elapsed());
                std::thread::sleep(wait);
            }
            if let Err(e) = send(&mut ws, &WireMessage::Observation(observe(world, &ep))) {
                ep.abort(EpisodeStatus::Aborted);
                break Err(e);
            }
            last_sent = Instant::now();
            sent_tick = Some(ep.tick);
        }
        if !ep.is_running() {
            break Ok(());
        }
        match await_action(&mut ws, &ep, cfg.action_timeout, shutdown) {
            Ok(Awaited::Action(a)) => {
                let before = ep.tick;
                ep.step(world, a, provider)?;
                if ep.tick != before {
                    if let Some(r) = recorder.as_mut() {
                        r.frame(&ep.frame());
                    }
                }
            }
            Ok(Awaited::End(status)) => {
                ep.abort(status);
                break Ok(());
            }
            Err(e) => {
                ep.abort(EpisodeStatus::Aborted);
                break Err(e);
            }
        }
    };

    let log = ep.to_log();
    let metrics = episode_metrics(&log, spec.delta_success_m)?;
    if let Some(r) = recorder.as_mut() {
        r.end(&ep, &log, &metrics);
    }
    log::info!("{}: ended with {:?}", ep.id, ep.status);
    let end = WireMessage::EpisodeEnd(EpisodeEnd {
        protocol_version: PROTOCOL_VERSION,
        episode_id: ep.id.clone(),
        status: ep.status,
        metrics,
        ndi: ep.ndi,
        log,
    });
    let _ = send(&mut ws, &end);
    let _ = ws.close(None);
    drain(&mut ws);
    result
}
