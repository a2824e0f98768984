mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use askworld::inquiry::TemplateProvider;
use askworld::metrics::episode_metrics;
use askworld::protocol::{client_session, serve, FnAgent, ProtocolError, Server, ServerConfig, WireMessage};
use askworld::task::{run_scripted, sample_episode, AgentAction, AgentConfig, EpisodeConfig, EpisodeStatus, Policy, ScriptedAgent};
use common::{action_json, raw_connect, recv, send_text, world, RawSocket};
use serde_json::Value;

fn start(scene: &str, tweak: impl FnOnce(&mut ServerConfig)) -> Server {
    let mut cfg = ServerConfig { port: 0, ..ServerConfig::default() };
    tweak(&mut cfg);
    serve(world(scene), cfg, Arc::new(TemplateProvider)).unwrap()
}

fn recv_text(ws: &mut RawSocket) -> Option<String> {
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => return Some(t.to_string()),
            Ok(tungstenite::Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

/// Plays `cmds` (Forward once exhausted) and returns the raw `episode_end` text.
fn raw_episode(url: &str, cmds: &[&str]) -> String {
    let mut ws = raw_connect(url);
    let hello: Value = serde_json::from_str(&recv_text(&mut ws).unwrap()).unwrap();
    let id = hello["episode_id"].as_str().unwrap().to_owned();
    let mut i = 0;
    loop {
        let text = recv_text(&mut ws).expect("server closed early");
        let v: Value = serde_json::from_str(&text).unwrap();
        match v["type"].as_str().unwrap() {
            "episode_end" => return text,
            "observation" if !v["done"].as_bool().unwrap() => {
                let tick = v["tick"].as_u64().unwrap() as u32;
                send_text(&mut ws, &action_json(&id, tick, cmds.get(i).copied().unwrap_or("forward")));
                i += 1;
            }
            _ => {}
        }
    }
}

fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.push(k.clone());
                keys(x, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| keys(x, out)),
        _ => {}
    }
}

#[test]
fn forwards_run_to_the_end() {
    let server = start("town_square", |_| {});
    let out = client_session(&format!("{}/?seed=21", server.url()), &mut FnAgent(|_: &_| AgentAction::Forward)).unwrap();
    let end = out.end.expect("episode_end");
    assert!(!out.partial && out.errors.is_empty());
    assert!(out.observations.len() <= 101);
    assert!(out.observations.last().unwrap().done);
    for (i, o) in out.observations.iter().enumerate() {
        assert_eq!(o.tick as usize, i);
        assert_eq!(o.remaining_steps, 100 - o.tick);
    }
    assert!(matches!(end.status, EpisodeStatus::StepLimitEnd | EpisodeStatus::CollisionEnd));
    let log = out.log.unwrap();
    assert_eq!(log.trajectory, end.log.trajectory);
    assert_eq!(episode_metrics(&log, end.log.spec.delta_success_m).unwrap(), end.metrics);
}

#[test]
fn same_seed_same_bytes() {
    let server = start("town_square", |_| {});
    let url = format!("{}/?seed=77", server.url());
    let cmds = ["forward", "ask", "turn_left", "forward", "forward", "turn_right", "ask"];
    let a = raw_episode(&url, &cmds);
    let b = raw_episode(&url, &cmds);
    assert_eq!(a, b);
    let other = raw_episode(&format!("{}/?seed=78", server.url()), &cmds);
    assert_ne!(a, other);
}

#[test]
fn stop_before_moving() {
    let server = start("duplicate_stores", |_| {});
    let out = client_session(&server.url(), &mut FnAgent(|_: &_| AgentAction::Stop)).unwrap();
    let end = out.end.unwrap();
    assert_eq!(end.status, EpisodeStatus::StoppedEnd);
    assert_eq!(end.log.trajectory.len(), 1);
    assert_eq!(end.metrics.tl, 0.0);
    assert_eq!(end.episode_id, "ep-0");
}

#[test]
fn networked_oracle_matches_in_process() {
    let server = start("duplicate_stores", |_| {});
    let w = world("duplicate_stores");
    let cfg = EpisodeConfig::default();
    for seed in [1, 6, 13] {
        let spec = sample_episode(&w, seed, &cfg).unwrap();
        let local =
            run_scripted(&w, &spec, &cfg, Policy::OracleAsk, &AgentConfig::default(), &TemplateProvider, None).unwrap();
        let mut agent = ScriptedAgent::new(Policy::OracleAsk, AgentConfig::default());
        let out = client_session(&format!("{}/?seed={seed}", server.url()), &mut agent).unwrap();
        let end = out.end.unwrap();
        assert_eq!(end.log, local);
        assert_eq!(end.metrics, episode_metrics(&local, 3.0).unwrap());
        assert_eq!(out.log.unwrap().ndi_events, local.ndi_events);
    }
}

#[test]
fn unreachable_server() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let r = client_session(&format!("ws://127.0.0.1:{port}"), &mut FnAgent(|_: &_| AgentAction::Stop));
    assert!(matches!(r, Err(ProtocolError::Connect(_))));
}

#[test]
fn hello_hides_the_goal() {
    let server = start("duplicate_stores", |_| {});
    let w = world("duplicate_stores");
    let cfg = EpisodeConfig::default();
    let goal_of = |s: u64| sample_episode(&w, s, &cfg).unwrap().goal_poi_id;
    let a = 0;
    let b = (1..50).find(|&s| goal_of(s) != goal_of(a)).expect("two goals");
    let hellos: Vec<Value> = [a, b]
        .iter()
        .map(|s| {
            let mut ws = raw_connect(&format!("{}/?seed={s}", server.url()));
            let text = recv_text(&mut ws).unwrap();
            serde_json::from_str(&text).unwrap()
        })
        .collect();
    let without_condition = |h: &Value| {
        let mut s = h["scene"].clone();
        s.as_object_mut().unwrap().remove("condition");
        s
    };
    assert_eq!(without_condition(&hellos[0]), without_condition(&hellos[1]));
    for h in &hellos {
        let mut k = Vec::new();
        keys(h, &mut k);
        assert!(k.iter().all(|k| !k.contains("goal")), "{k:?}");
    }
}

#[test]
fn shutdown_aborts_live_sessions() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().to_path_buf();
    let server = start("town_square", |c| c.runs_dir = Some(runs.clone()));
    let mut ws = raw_connect(&server.url());
    assert!(matches!(recv(&mut ws), Some(WireMessage::Hello(_))));
    assert!(matches!(recv(&mut ws), Some(WireMessage::Observation(_))));
    send_text(&mut ws, &action_json("ep-0", 0, "forward"));
    assert!(matches!(recv(&mut ws), Some(WireMessage::Observation(o)) if o.tick == 1));
    let stopper = std::thread::spawn(move || server.shutdown());
    let end = loop {
        match recv(&mut ws) {
            Some(WireMessage::EpisodeEnd(e)) => break e,
            Some(_) => continue,
            None => panic!("closed without episode_end"),
        }
    };
    stopper.join().unwrap();
    assert_eq!(end.status, EpisodeStatus::Aborted);
    assert_eq!(end.log.trajectory.len(), 2);
    let a = askworld::recorder::load_archive(&runs.join("ep-0")).unwrap();
    assert_eq!(a.manifest.status, EpisodeStatus::Aborted);
    assert_eq!(a.frames.len(), 2);
}

#[test]
fn paced_observations() {
    let server = start("town_square", |c| {
        c.pace = Some(Duration::from_millis(40));
        c.episode.max_steps = 10;
    });
    let t = Instant::now();
    let out = client_session(&server.url(), &mut FnAgent(|_: &_| AgentAction::TurnLeft)).unwrap();
    assert_eq!(out.observations.len(), 11);
    assert!(t.elapsed() >= Duration::from_millis(40 * 10), "{:?}", t.elapsed());
}

#[test]
fn stale_and_foreign_actions_are_rejected() {
    let server = start("town_square", |_| {});
    let mut ws = raw_connect(&server.url());
    recv(&mut ws);
    recv(&mut ws);
    send_text(&mut ws, &action_json("ep-0", 3, "forward"));
    send_text(&mut ws, &action_json("ep-9", 0, "forward"));
    send_text(&mut ws, r#"{"type":"action"}"#);
    let codes: Vec<String> = (0..3)
        .map(|_| match recv(&mut ws) {
            Some(WireMessage::AckError(e)) => e.code,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(codes, ["tick_mismatch", "episode_mismatch", "malformed"]);
    send_text(&mut ws, &action_json("ep-0", 0, "stop"));
    assert!(matches!(recv(&mut ws), Some(WireMessage::EpisodeEnd(e)) if e.status == EpisodeStatus::StoppedEnd));
}
