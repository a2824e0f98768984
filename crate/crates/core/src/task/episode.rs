use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::World;
use super::{AgentAction, EpisodeConfig, EpisodeSpec, EpisodeStatus, Pose, TaskError};
use crate::crowd::{
    give_directions, receive_inquiry, spawn_pedestrian, step_crowd, CrowdContext, FsmState, InquiryContext, Pedestrian,
};
use crate::geom::{wrap_angle, Vec2};
use crate::inquiry::{InstructionProvider, InstructionResult, NavStyle};
use crate::metrics::EpisodeLog;
use crate::motion::{step_vehicles, BodyState, RouteGraph, Steering, Vehicle};
use crate::scene::{ConditionTags, Poi, Scene, Weather};
use crate::seeding::rng_for;

const MAX_SAMPLE_ATTEMPTS: u32 = 1000;
pub const SYNTHETIC_GIVER_ID: &str = "synthetic-giver";
const VEHICLE_LENGTH_M: f64 = 4.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianFrame {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub state: FsmState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleFrame {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Directions received; `ask_tick` is absent for the initial instruction.
    Instruction { giver_id: String, text: String, ask_tick: Option<u32> },
    AskFailed { ask_tick: u32, reason: String },
    Collision { with: String },
    Terminated { status: EpisodeStatus },
}

/// World state after a tick, as recorded and replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u32,
    pub sim_time: f64,
    pub agent: Pose,
    /// Action that led into this tick.
    pub action: Option<AgentAction>,
    pub pedestrians: Vec<PedestrianFrame>,
    pub vehicles: Vec<VehicleFrame>,
    pub events: Vec<Event>,
}

fn random_condition(base: &ConditionTags, rng: &mut impl Rng) -> ConditionTags {
    let weather = *[Weather::Clear, Weather::Rain, Weather::Fog].choose(rng).expect("non-empty");
    let factor = match weather {
        Weather::Clear => 1.0,
        Weather::Rain => 0.8,
        Weather::Fog => 0.5,
    };
    ConditionTags { time_of_day: rng.random_range(0.0..24.0), weather, visibility_m: base.visibility_m * factor }
}

/// Draw a start in free space of a spawn region and a goal POI at least
/// `min_goal_distance` away, with randomized conditions.
pub fn sample_episode(world: &World, seed: u64, cfg: &EpisodeConfig) -> Result<EpisodeSpec, TaskError> {
    let scene = &world.scene;
    if scene.spawn_regions.is_empty() {
        return Err(TaskError::NoSpawnRegion);
    }
    let goals = scene.goal_pois();
    let mut rng = rng_for(seed, "episode", &[]);
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let r = scene.spawn_regions.choose(&mut rng).expect("non-empty");
        let start = Vec2::new(rng.random_range(r.min.x..=r.max.x), rng.random_range(r.min.y..=r.max.y));
        if !world.nav.is_free_point(start) {
            continue;
        }
        let far: Vec<&&Poi> = goals.iter().filter(|p| p.position.distance(start) >= cfg.min_goal_distance).collect();
        let Some(goal) = far.choose(&mut rng) else { continue };
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let condition = random_condition(&scene.condition, &mut rng);
        return Ok(EpisodeSpec {
            scene_id: scene.id.clone(),
            seed,
            start_pose: Pose { x: start.x, y: start.y, theta: wrap_angle(heading) },
            goal_poi_id: goal.id.clone(),
            delta_success_m: cfg.delta_success_m,
            max_steps: cfg.max_steps,
            tick_duration: cfg.tick_duration,
            hail_radius: cfg.hail_radius,
            pedestrian_count: cfg.pedestrian_count,
            vehicle_count: cfg.vehicle_count,
            condition,
        });
    }
    Err(TaskError::NoFeasibleEpisode(MAX_SAMPLE_ATTEMPTS))
}

fn spawn_vehicles(scene: &Scene, count: u32, seed: u64) -> RouteGraph {
    let mut roads = RouteGraph { vehicles: Vec::new(), ..scene.road_graph.clone() };
    if roads.edges.is_empty() {
        return roads;
    }
    let mut rng = rng_for(seed, "vehicles", &[]);
    for _ in 0..count {
        let edge = rng.random_range(0..roads.edges.len());
        let len = roads.edge_length(edge);
        let limit = roads.edges[edge].speed_limit;
        roads.vehicles.push(Vehicle {
            edge,
            arclength: rng.random_range(0.0..len.max(f64::MIN_POSITIVE)),
            speed: limit * rng.random_range(0.6..=1.0),
            length: VEHICLE_LENGTH_M,
            halted: false,
        });
    }
    roads
}

/// Live state of one episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub id: String,
    pub spec: EpisodeSpec,
    pub cfg: EpisodeConfig,
    pub tick: u32,
    pub sim_time: f64,
    pub agent: BodyState,
    pub pedestrians: Vec<Pedestrian>,
    pub roads: RouteGraph,
    pub instructions: Vec<InstructionResult>,
    pub ndi: u32,
    pub ndi_events: Vec<u32>,
    pub status: EpisodeStatus,
    pub trajectory: Vec<Vec2>,
    pub goal: Poi,
    pub shortest_path_len: f64,
    /// Instruction to show in the observation of the current tick.
    pub current_instruction: Option<String>,
    pub ask_failed: bool,
    last_action: Option<AgentAction>,
    last_events: Vec<Event>,
}

/// Populate the world and produce the first instruction. The initial
/// instruction is free: `ndi` starts at zero.
pub fn start_episode(
    world: &World,
    spec: &EpisodeSpec,
    cfg: &EpisodeConfig,
    provider: &dyn InstructionProvider,
) -> Result<Episode, TaskError> {
    let scene = &world.scene;
    let goal = scene.poi(&spec.goal_poi_id).ok_or_else(|| TaskError::UnknownGoal(spec.goal_poi_id.clone()))?.clone();
    let start = spec.start_pose.position();
    let agent = BodyState::at_rest(0, start, spec.start_pose.theta);

    let mut pedestrians: Vec<Pedestrian> = Vec::with_capacity(spec.pedestrian_count as usize);
    let mut taken = vec![start];
    for i in 0..spec.pedestrian_count as u64 {
        let p = spawn_pedestrian(i, spec.seed, scene, &world.nav, &taken);
        taken.push(p.body.position);
        pedestrians.push(p);
    }
    let roads = spawn_vehicles(scene, spec.vehicle_count, spec.seed);

    let shortest_path_len = match world.nav.plan_snapped(start, goal.position) {
        Ok(path) => path.cost.max(start.distance(goal.position)),
        Err(_) => start.distance(goal.position),
    }
    .max(f64::MIN_POSITIVE);

    let ictx = InquiryContext { scene, nav: &world.nav, sketch: &cfg.sketch, provider };
    let giver = pedestrians.iter().min_by(|a, b| {
        a.body.position.distance(start).total_cmp(&b.body.position.distance(start))
    });
    let first = match giver {
        Some(p) => give_directions(start, agent.heading, &goal, &p.nav_style, &p.profile.id, &p.profile.summary(), &ictx),
        None => give_directions(start, agent.heading, &goal, &NavStyle::NEUTRAL, SYNTHETIC_GIVER_ID, "", &ictx),
    };
    let event = Event::Instruction { giver_id: first.giver_id.clone(), text: first.text.clone(), ask_tick: None };

    Ok(Episode {
        id: spec.episode_id(),
        spec: spec.clone(),
        cfg: cfg.clone(),
        tick: 0,
        sim_time: spec.condition.time_of_day * 3600.0,
        agent,
        pedestrians,
        roads,
        current_instruction: Some(first.text.clone()),
        instructions: vec![first],
        ndi: 0,
        ndi_events: Vec::new(),
        status: EpisodeStatus::Running,
        trajectory: vec![start],
        goal,
        shortest_path_len,
        ask_failed: false,
        last_action: None,
        last_events: vec![event],
    })
}

impl Episode {
    pub fn is_running(&self) -> bool {
        self.status == EpisodeStatus::Running
    }

    pub fn remaining_steps(&self) -> u32 {
        self.spec.max_steps.saturating_sub(self.tick)
    }

    pub fn agent_pose(&self) -> Pose {
        Pose { x: self.agent.position.x, y: self.agent.position.y, theta: self.agent.heading }
    }

    /// Apply one agent action and advance the world by one tick. `Stop`
    /// ends the episode without advancing time.
    pub fn step(&mut self, world: &World, action: AgentAction, provider: &dyn InstructionProvider) -> Result<(), TaskError> {
        if !self.is_running() {
            return Err(TaskError::EpisodeEnded);
        }
        self.current_instruction = None;
        self.ask_failed = false;
        self.last_action = Some(action);
        self.last_events.clear();
        let turn = self.cfg.turn_deg.to_radians();
        let steering = match action {
            AgentAction::Stop => {
                self.status = EpisodeStatus::StoppedEnd;
                return Ok(());
            }
            AgentAction::Forward => Steering::Heading,
            AgentAction::TurnLeft | AgentAction::TurnRight => {
                let sign = if action == AgentAction::TurnLeft { 1.0 } else { -1.0 };
                self.agent.heading = wrap_angle(self.agent.heading + sign * turn);
                self.agent.velocity = Vec2::ZERO;
                Steering::Hold
            }
            AgentAction::Ask => {
                self.agent.velocity = Vec2::ZERO;
                self.ask(world, provider);
                Steering::Hold
            }
        };

        let ctx = CrowdContext { scene: &world.scene, nav: &world.nav, walls: &world.walls, params: &self.cfg.sfm };
        let dt = self.spec.tick_duration;
        let mut agent = [self.agent.clone()];
        let mut agent_steer = [steering];
        step_crowd(&mut self.pedestrians, &mut agent, &mut agent_steer, &ctx, self.sim_time, dt)?;
        let [agent] = agent;
        self.agent = agent;
        let bodies: Vec<(Vec2, f64)> = std::iter::once(&self.agent)
            .chain(self.pedestrians.iter().map(|p| &p.body))
            .map(|b| (b.position, b.radius))
            .collect();
        step_vehicles(&mut self.roads, &bodies, dt);

        self.sim_time += dt;
        self.tick += 1;
        self.trajectory.push(self.agent.position);

        if let Some(with) = self.collision() {
            self.last_events.push(Event::Collision { with });
            self.status = EpisodeStatus::CollisionEnd;
        } else if self.tick >= self.spec.max_steps {
            self.status = EpisodeStatus::StepLimitEnd;
        }
        if self.status.is_terminal() {
            self.last_events.push(Event::Terminated { status: self.status });
        }
        Ok(())
    }

    fn ask(&mut self, world: &World, provider: &dyn InstructionProvider) {
        let here = self.agent.position;
        let nearest = self
            .pedestrians
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.body.position.distance(here)))
            .filter(|&(_, d)| d <= self.spec.hail_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, _)) = nearest else {
            self.ask_failed = true;
            self.last_events.push(Event::AskFailed { ask_tick: self.tick, reason: "no pedestrian in range".into() });
            return;
        };
        let ictx = InquiryContext { scene: &world.scene, nav: &world.nav, sketch: &self.cfg.sketch, provider };
        match receive_inquiry(&mut self.pedestrians[i], here, self.agent.heading, &self.goal, self.sim_time, &ictx) {
            Ok(result) => {
                self.ndi += 1;
                self.ndi_events.push(self.tick);
                self.current_instruction = Some(result.text.clone());
                self.last_events.push(Event::Instruction {
                    giver_id: result.giver_id.clone(),
                    text: result.text.clone(),
                    ask_tick: Some(self.tick),
                });
                self.instructions.push(result);
            }
            Err(e) => {
                self.ask_failed = true;
                self.last_events.push(Event::AskFailed { ask_tick: self.tick, reason: e.to_string() });
            }
        }
    }

    fn collision(&self) -> Option<String> {
        let a = &self.agent;
        for p in &self.pedestrians {
            if p.body.position.distance(a.position) < p.body.radius + a.radius {
                return Some(p.profile.id.clone());
            }
        }
        for (i, v) in self.roads.vehicles.iter().enumerate() {
            if self.roads.vehicle_footprint(v).distance_to(a.position) < a.radius {
                return Some(format!("vehicle-{i}"));
            }
        }
        None
    }

    /// End the episode from outside (timeout, disconnect, shutdown).
    pub fn abort(&mut self, status: EpisodeStatus) {
        if self.is_running() {
            self.status = status;
        }
    }

    /// Snapshot of the current tick.
    pub fn frame(&self) -> Frame {
        Frame {
            tick: self.tick,
            sim_time: self.sim_time,
            agent: self.agent_pose(),
            action: self.last_action,
            pedestrians: self
                .pedestrians
                .iter()
                .map(|p| PedestrianFrame {
                    id: p.profile.id.clone(),
                    x: p.body.position.x,
                    y: p.body.position.y,
                    heading: p.body.heading,
                    state: p.fsm.state,
                })
                .collect(),
            vehicles: self
                .roads
                .vehicles
                .iter()
                .map(|v| {
                    let pose = self.roads.vehicle_pose(v);
                    VehicleFrame { x: pose.position.x, y: pose.position.y, heading: pose.heading, halted: v.halted }
                })
                .collect(),
            events: self.last_events.clone(),
        }
    }

    pub fn to_log(&self) -> EpisodeLog {
        EpisodeLog {
            episode_id: self.id.clone(),
            spec: self.spec.clone(),
            trajectory: self.trajectory.clone(),
            goal: self.goal.position,
            shortest_path_len: self.shortest_path_len,
            ndi_events: self.ndi_events.clone(),
            status: self.status,
            instructions: self.instructions.clone(),
        }
    }
}
