use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Vec2};
use crate::metrics::{EpisodeLog, EpisodeMetrics};
use crate::motion::RoadEdge;
use crate::scene::{ConditionTags, PoiCategory, Prism};
use crate::task::{AgentAction, Episode, EpisodeStatus, Pose, World};

pub const PROTOCOL_VERSION: u32 = 1;
pub const RAY_COUNT: usize = 36;
/// Shortest reported ray, so every distance stays strictly positive.
pub const MIN_RAY_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello(Hello),
    Observation(Observation),
    Action(ActionMsg),
    AckError(AckError),
    EpisodeEnd(EpisodeEnd),
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloPoi {
    pub id: String,
    pub name: String,
    pub category: PoiCategory,
    pub pos: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    pub nodes: Vec<Vec2>,
    pub edges: Vec<RoadEdge>,
}

/// Static scene description; never says which POI is the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloScene {
    pub id: String,
    pub bounds: Rect,
    pub obstacles: Vec<Prism>,
    pub pois: Vec<HelloPoi>,
    pub roads: RoadGeometry,
    pub condition: ConditionTags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol_version: u32,
    pub episode_id: String,
    pub scene: HelloScene,
    pub delta_success_m: f64,
    pub max_steps: u32,
    pub tick_duration_s: f64,
    pub hail_radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearbyKind {
    Pedestrian,
    Vehicle,
}

/// Object position in the agent frame: x forward, y to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nearby {
    pub kind: NearbyKind,
    pub rel_x: f64,
    pub rel_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub protocol_version: u32,
    pub episode_id: String,
    pub tick: u32,
    pub pose: Pose,
    pub rays: Vec<f64>,
    pub nearby: Vec<Nearby>,
    pub instruction: Option<String>,
    pub ask_failed: bool,
    pub remaining_steps: u32,
    /// Set on the last observation of an episode; no action is expected.
    #[serde(default)]
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMsg {
    pub protocol_version: u32,
    pub episode_id: String,
    pub tick: u32,
    pub cmd: AgentAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckError {
    pub protocol_version: u32,
    pub episode_id: String,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub protocol_version: u32,
    pub episode_id: String,
    pub status: EpisodeStatus,
    pub metrics: EpisodeMetrics,
    pub ndi: u32,
    /// Full log so clients can reproduce the server's scoring.
    pub log: EpisodeLog,
}

pub mod codes {
    pub const MALFORMED: &str = "malformed";
    pub const TICK_MISMATCH: &str = "tick_mismatch";
    pub const BAD_VERSION: &str = "bad_version";
    pub const EPISODE_MISMATCH: &str = "episode_mismatch";
    pub const UNEXPECTED: &str = "unexpected_message";
}

pub fn build_hello(world: &World, ep: &Episode) -> Hello {
    let s = &world.scene;
    Hello {
        protocol_version: PROTOCOL_VERSION,
        episode_id: ep.id.clone(),
        scene: HelloScene {
            id: s.id.clone(),
            bounds: s.bounds,
            obstacles: s.obstacles.clone(),
            pois: s
                .pois
                .iter()
                .map(|p| HelloPoi { id: p.id.clone(), name: p.name.clone(), category: p.category, pos: p.position })
                .collect(),
            roads: RoadGeometry { nodes: s.road_graph.nodes.clone(), edges: s.road_graph.edges.clone() },
            condition: ep.spec.condition,
        },
        delta_success_m: ep.spec.delta_success_m,
        max_steps: ep.spec.max_steps,
        tick_duration_s: ep.spec.tick_duration,
        hail_radius_m: ep.spec.hail_radius,
    }
}

fn to_agent_frame(rel: Vec2, heading: f64) -> Vec2 {
    rel.rotated(-heading)
}

/// Range-limited view from the agent: static-geometry rays plus nearby
/// pedestrians and vehicles.
pub fn observe(world: &World, ep: &Episode) -> Observation {
    let vis = ep.spec.condition.visibility_m;
    let origin = ep.agent.position;
    let heading = ep.agent.heading;
    let rays = (0..RAY_COUNT)
        .map(|k| {
            let dir = Vec2::from_angle(heading + (k as f64 * 10.0).to_radians());
            let hit = world.walls.iter().filter_map(|w| w.ray_hit(origin, dir)).fold(f64::INFINITY, f64::min);
            hit.min(vis).max(MIN_RAY_M)
        })
        .collect();
    let mut nearby = Vec::new();
    for p in &ep.pedestrians {
        let rel = p.body.position - origin;
        if rel.norm() <= vis {
            let r = to_agent_frame(rel, heading);
            nearby.push(Nearby { kind: NearbyKind::Pedestrian, rel_x: r.x, rel_y: r.y });
        }
    }
    for v in &ep.roads.vehicles {
        let rel = ep.roads.vehicle_footprint(v).centroid() - origin;
        if rel.norm() <= vis {
            let r = to_agent_frame(rel, heading);
            nearby.push(Nearby { kind: NearbyKind::Vehicle, rel_x: r.x, rel_y: r.y });
        }
    }
    Observation {
        protocol_version: PROTOCOL_VERSION,
        episode_id: ep.id.clone(),
        tick: ep.tick,
        pose: ep.agent_pose(),
        rays,
        nearby,
        instruction: ep.current_instruction.clone(),
        ask_failed: ep.ask_failed,
        remaining_steps: ep.remaining_steps(),
        done: !ep.is_running(),
    }
}

/// Absolute position of an agent-frame offset.
pub fn nearby_world_position(pose: &Pose, n: &Nearby) -> Vec2 {
    pose.position() + Vec2::new(n.rel_x, n.rel_y).rotated(pose.theta)
}
