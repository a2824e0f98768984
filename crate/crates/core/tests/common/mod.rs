#![allow(dead_code)]

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use askworld::geom::Vec2;
use askworld::metrics::EpisodeLog;
use askworld::scene::{load_scene, ConditionTags, OccupancyConfig, Scene};
use askworld::task::{EpisodeConfig, EpisodeSpec, EpisodeStatus, Pose, World};
use rand::Rng;

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(format!("{name}.json"))
}

pub fn scene(name: &str) -> Scene {
    load_scene(&scene_path(name)).unwrap()
}

fn build(name: &str) -> Arc<World> {
    Arc::new(World::new(scene(name), &OccupancyConfig::default(), EpisodeConfig::default().inflate_radius).unwrap())
}

/// Worlds are expensive to build; each test binary builds each at most once.
pub fn world(name: &str) -> Arc<World> {
    static DUP: OnceLock<Arc<World>> = OnceLock::new();
    static TOWN: OnceLock<Arc<World>> = OnceLock::new();
    static THREE: OnceLock<Arc<World>> = OnceLock::new();
    let cell = match name {
        "duplicate_stores" => &DUP,
        "town_square" => &TOWN,
        "three_buildings" => &THREE,
        other => panic!("no fixture scene {other}"),
    };
    Arc::clone(cell.get_or_init(|| build(name)))
}

// ---- metrics reference ----

#[derive(Debug, Clone, Copy)]
pub struct RefMetrics {
    pub tl: f64,
    pub s: f64,
    pub spl: f64,
    pub ne: f64,
    pub one: f64,
    pub osr: f64,
    pub ndi: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Straight from the metric definitions, on plain tuples.
pub fn reference_metrics(traj: &[(f64, f64)], goal: (f64, f64), l_star: f64, asks: usize, delta: f64) -> RefMetrics {
    let mut tl = 0.0;
    for t in 1..traj.len() {
        tl += dist(traj[t], traj[t - 1]);
    }
    let ne = dist(*traj.last().unwrap(), goal);
    let mut one = f64::MAX;
    for p in traj {
        let d = dist(*p, goal);
        if d < one {
            one = d;
        }
    }
    let s = if ne <= delta { 1.0 } else { 0.0 };
    let spl = if s == 1.0 { l_star / if tl > l_star { tl } else { l_star } } else { 0.0 };
    let osr = if one <= delta { 1.0 } else { 0.0 };
    RefMetrics { tl, s, spl, ne, one, osr, ndi: asks as f64 }
}

pub fn spec_stub(seed: u64, delta: f64) -> EpisodeSpec {
    EpisodeSpec {
        scene_id: "synthetic".into(),
        seed,
        start_pose: Pose { x: 0.0, y: 0.0, theta: 0.0 },
        goal_poi_id: "goal".into(),
        delta_success_m: delta,
        max_steps: 100,
        tick_duration: 1.0,
        hail_radius: 10.0,
        pedestrian_count: 0,
        vehicle_count: 0,
        condition: ConditionTags::default(),
    }
}

/// Random walk log; sometimes ends near the goal, sometimes passes it.
pub fn random_log(rng: &mut impl Rng, id: u64) -> EpisodeLog {
    let goal = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let start = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let n = rng.random_range(1..=101);
    let mut p = start;
    let mut traj = vec![p];
    let homing = rng.random_bool(0.5);
    for _ in 1..n {
        let step = if homing && rng.random_bool(0.8) {
            let to = goal - p;
            if to.norm() < 1.4 { to } else { to.normalized() * 1.34 }
        } else {
            Vec2::from_angle(rng.random_range(-3.2..3.2)) * rng.random_range(0.0..1.5)
        };
        p = p + step;
        traj.push(p);
    }
    let euclid = start.distance(goal);
    let l_star = (euclid * rng.random_range(1.0..1.5)).max(0.1);
    let asks = rng.random_range(0..5);
    EpisodeLog {
        episode_id: format!("ep-{id}"),
        spec: spec_stub(id, 3.0),
        trajectory: traj,
        goal,
        shortest_path_len: l_star,
        ndi_events: (0..asks).map(|k| k * 7 + 1).collect(),
        status: EpisodeStatus::StepLimitEnd,
        instructions: vec![],
    }
}

// ---- planner reference ----

/// Dijkstra over 8-connected free cells without corner cutting. Costs are
/// kept as (straight, diagonal) step counts, ordered by their exact value.
pub fn dijkstra_steps(blocked: &[bool], w: usize, h: usize, start: (usize, usize), goal: (usize, usize)) -> Option<(u32, u32)> {
    let idx = |c: usize, r: usize| r * w + c;
    if blocked[idx(start.0, start.1)] || blocked[idx(goal.0, goal.1)] {
        return None;
    }
    let cost = |s: u32, d: u32| s as f64 + d as f64 * std::f64::consts::SQRT_2;
    let mut best: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(idx(start.0, start.1), (0, 0));
    heap.push(Reverse((Ordf(0.0), 0u32, 0u32, start.0, start.1)));
    while let Some(Reverse((Ordf(c0), s, d, c, r))) = heap.pop() {
        let i = idx(c, r);
        if let Some(&(bs, bd)) = best.get(&i) {
            if cost(bs, bd) < c0 {
                continue;
            }
        }
        if (c, r) == goal {
            return Some((s, d));
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                    continue;
                }
                let (nc, nr) = (nc as usize, nr as usize);
                if blocked[idx(nc, nr)] {
                    continue;
                }
                let diag = dc != 0 && dr != 0;
                if diag && (blocked[idx(nc, r)] || blocked[idx(c, nr)]) {
                    continue;
                }
                let (ns, nd) = if diag { (s, d + 1) } else { (s + 1, d) };
                let nc0 = cost(ns, nd);
                let j = idx(nc, nr);
                if best.get(&j).is_none_or(|&(bs, bd)| nc0 < cost(bs, bd)) {
                    best.insert(j, (ns, nd));
                    heap.push(Reverse((Ordf(nc0), ns, nd, nc, nr)));
                }
            }
        }
    }
    None
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Ordf(f64);
impl Eq for Ordf {}
impl Ord for Ordf {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

// ---- geometry reference ----

/// Inside-or-on test via the half-planes of a counter-clockwise polygon.
pub fn inside_half_planes(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-12
    })
}

// ---- raw protocol client ----

pub type RawSocket = tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<std::net::TcpStream>>;

pub fn raw_connect(url: &str) -> RawSocket {
    let (ws, _) = tungstenite::connect(url).unwrap();
    ws
}

/// Next protocol message, or `None` once the server closed.
pub fn recv(ws: &mut RawSocket) -> Option<askworld::protocol::WireMessage> {
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Ok(tungstenite::Message::Close(_)) => return None,
            Ok(_) => continue,
            Err(_) => return None,
        }
    }
}

pub fn send_text(ws: &mut RawSocket, text: &str) {
    ws.send(tungstenite::Message::text(text.to_string())).unwrap();
}

pub fn action_json(episode_id: &str, tick: u32, cmd: &str) -> String {
    format!(r#"{{"type":"action","protocol_version":1,"episode_id":"{episode_id}","tick":{tick},"cmd":"{cmd}"}}"#)
}
