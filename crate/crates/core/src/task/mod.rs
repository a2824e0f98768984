//! Direction inquiry episodes: sampling, stepping, asking and the scripted
//! reference agents.

mod agents;
mod episode;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::inquiry::SketchConfig;
use crate::motion::{MotionError, SfmParams};
use crate::scene::ConditionTags;

pub use agents::{
    described_distance, mentioned_goal_name, run_episode, run_scripted, Agent, AgentConfig, EpisodeSink, Policy,
    ScriptedAgent,
};
pub use episode::{
    sample_episode, start_episode, Episode, Event, Frame, PedestrianFrame, VehicleFrame, SYNTHETIC_GIVER_ID,
};
pub use world::World;

/// Radius of success the metrics use unless told otherwise, meters.
pub const DEFAULT_DELTA_M: f64 = 3.0;
/// Standard range for the success radius, meters.
pub const STANDARD_DELTA_RANGE: (f64, f64) = (1.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scene_id: String,
    pub seed: u64,
    pub start_pose: Pose,
    pub goal_poi_id: String,
    pub delta_success_m: f64,
    pub max_steps: u32,
    pub tick_duration: f64,
    pub hail_radius: f64,
    pub pedestrian_count: u32,
    pub vehicle_count: u32,
    pub condition: ConditionTags,
}

impl EpisodeSpec {
    pub fn episode_id(&self) -> String {
        format!("ep-{}", self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    CollisionEnd,
    StepLimitEnd,
    StoppedEnd,
    /// The remote agent did not answer in time.
    Timeout,
    /// The session ended without a terminal state (disconnect or shutdown).
    Aborted,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
    Ask,
}

/// Knobs shared by every episode of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub delta_success_m: f64,
    pub max_steps: u32,
    pub tick_duration: f64,
    pub hail_radius: f64,
    pub pedestrian_count: u32,
    pub vehicle_count: u32,
    /// Heading change of one turn action, degrees.
    pub turn_deg: f64,
    pub min_goal_distance: f64,
    /// Obstacle inflation for planning, meters.
    pub inflate_radius: f64,
    pub sfm: SfmParams,
    pub sketch: SketchConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            delta_success_m: DEFAULT_DELTA_M,
            max_steps: 100,
            tick_duration: 1.0,
            hail_radius: 10.0,
            pedestrian_count: 10,
            vehicle_count: 2,
            turn_deg: 30.0,
            min_goal_distance: 10.0,
            inflate_radius: 0.3,
            sfm: SfmParams::default(),
            sketch: SketchConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, allow_nonstandard_delta: bool) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::BadConfig(m.to_string()));
        let (lo, hi) = STANDARD_DELTA_RANGE;
        if !(self.delta_success_m > 0.0) {
            return bad("delta_success_m must be positive");
        }
        if !allow_nonstandard_delta && !(lo..=hi).contains(&self.delta_success_m) {
            return Err(TaskError::NonstandardDelta(self.delta_success_m));
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if !(self.hail_radius > 0.0) || !(self.min_goal_distance >= 0.0) || !(self.inflate_radius >= 0.0) {
            return bad("hail_radius, min_goal_distance and inflate_radius must be non-negative");
        }
        if !(self.turn_deg > 0.0 && self.turn_deg < 180.0) {
            return bad("turn_deg must lie in (0, 180)");
        }
        self.sfm.validate()?;
        crate::motion::substeps(self.tick_duration, &self.sfm)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("no feasible start/goal pair after {0} samples")]
    NoFeasibleEpisode(u32),
    #[error("scene has no spawn regions")]
    NoSpawnRegion,
    #[error("goal poi `{0}` does not exist")]
    UnknownGoal(String),
    #[error("episode already ended")]
    EpisodeEnded,
    #[error("success radius {0} m lies outside the standard 1-3 m range")]
    NonstandardDelta(f64),
    #[error("bad episode config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}
