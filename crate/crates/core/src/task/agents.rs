use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{start_episode, Episode, Frame};
use super::world::World;
use super::{AgentAction, EpisodeConfig, EpisodeSpec, TaskError};
use crate::geom::{wrap_angle, Vec2};
use crate::inquiry::InstructionProvider;
use crate::metrics::{episode_metrics, EpisodeLog, EpisodeMetrics};
use crate::motion::NavGrid;
use crate::protocol::{build_hello, nearby_world_position, observe, Hello, HelloPoi, NearbyKind, Observation};
use crate::scene::BODY_Z_BAND;
use crate::seeding::{rng_for, stable_hash};

/// Anything that turns observations into actions.
pub trait Agent {
    fn begin(&mut self, hello: &Hello);
    fn act(&mut self, obs: &Observation) -> AgentAction;
}

/// Receives an episode as it unfolds (the recorder implements this).
pub trait EpisodeSink {
    fn begin(&mut self, world: &World, episode: &Episode);
    fn frame(&mut self, frame: &Frame);
    fn end(&mut self, episode: &Episode, log: &EpisodeLog, metrics: &EpisodeMetrics);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Walk to the believed goal and stop; never ask.
    OracleNoAsk,
    /// As above, but ask when the belief is unconfirmed or progress stalls.
    OracleAsk,
    Random,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle_no_ask" => Ok(Policy::OracleNoAsk),
            "oracle_ask" => Ok(Policy::OracleAsk),
            "random" => Ok(Policy::Random),
            _ => Err(format!("unknown policy `{s}` (expected oracle_no_ask, oracle_ask or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Ticks per progress window.
    pub reask_interval: u32,
    /// Progress towards the belief below which a window counts as stalled, meters.
    pub reask_progress_m: f64,
    pub arrive_radius: f64,
    pub map_resolution: f64,
    pub map_inflate: f64,
    pub lookahead_m: f64,
    pub heading_tolerance_deg: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            reask_interval: 25,
            reask_progress_m: 2.0,
            arrive_radius: 1.5,
            map_resolution: 0.5,
            map_inflate: 0.5,
            lookahead_m: 1.5,
            heading_tolerance_deg: 15.0,
        }
    }
}

/// POI name mentioned last in `text` (the destination in every template
/// instruction). Longer names win when two start at the same place.
pub fn mentioned_goal_name<'a>(text: &str, names: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    names
        .into_iter()
        .filter_map(|n| text.rfind(n).map(|i| (i, n.len(), n)))
        .max_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
        .map(|(_, _, n)| n)
}

/// Total route length an instruction describes, meters. Vague phrases map
/// to the middle of their range.
pub fn described_distance(text: &str) -> Option<f64> {
    let lower = text.to_lowercase();
    let mut total = 0.0;
    let mut found = false;
    for (phrase, meters) in [("for a few steps", 0.0), ("for a short way", 10.0), ("for a while", 40.0), ("for quite far", 80.0)] {
        let n = lower.matches(phrase).count();
        if n > 0 {
            found = true;
            total += meters * n as f64;
        }
    }
    let words: Vec<&str> = lower.split_whitespace().collect();
    for w in words.windows(3) {
        if w[0] == "for" && w[2].trim_end_matches(|c: char| !c.is_alphanumeric()) == "meters" {
            if let Ok(m) = w[1].parse::<f64>() {
                found = true;
                total += m;
            }
        }
    }
    found.then_some(total)
}

/// Reference agent that sees only the hello message and observations.
pub struct ScriptedAgent {
    policy: Policy,
    cfg: AgentConfig,
    hail_radius: f64,
    pois: Vec<HelloPoi>,
    nav: Option<NavGrid>,
    rng: ChaCha8Rng,
    belief: Option<usize>,
    confirmed: bool,
    want_ask: bool,
    window: (u32, f64),
}

impl ScriptedAgent {
    pub fn new(policy: Policy, cfg: AgentConfig) -> Self {
        ScriptedAgent {
            policy,
            cfg,
            hail_radius: 0.0,
            pois: Vec::new(),
            nav: None,
            rng: rng_for(0, "agent", &[]),
            belief: None,
            confirmed: false,
            want_ask: false,
            window: (0, f64::INFINITY),
        }
    }

    pub fn belief(&self) -> Option<&HelloPoi> {
        self.belief.map(|i| &self.pois[i])
    }

    fn build_map(hello: &Hello, res: f64, inflate: f64) -> NavGrid {
        let b = hello.scene.bounds;
        let w = (b.width() / res).ceil().max(1.0) as usize;
        let h = (b.height() / res).ceil().max(1.0) as usize;
        let solid: Vec<_> = hello
            .scene
            .obstacles
            .iter()
            .filter(|o| o.z_max() > BODY_Z_BAND.0 && o.z_min() < BODY_Z_BAND.1)
            .collect();
        let mut occupied = vec![false; w * h];
        for r in 0..h {
            for c in 0..w {
                let p = b.min + Vec2::new((c as f64 + 0.5) * res, (r as f64 + 0.5) * res);
                occupied[r * w + c] = solid.iter().any(|o| o.footprint.contains(p));
            }
        }
        NavGrid::from_mask(b.min, res, w, h, &occupied, inflate)
    }

    fn route_length(&self, from: Vec2, to: Vec2) -> f64 {
        match self.nav.as_ref().map(|n| n.plan_snapped(from, to)) {
            Some(Ok(p)) => p.cost.max(from.distance(to)),
            _ => from.distance(to),
        }
    }

    fn read_instruction(&mut self, text: &str, here: Vec2) {
        let names: Vec<&str> = self.pois.iter().map(|p| p.name.as_str()).collect();
        let Some(name) = mentioned_goal_name(text, names.iter().copied()).map(str::to_owned) else {
            log::debug!("instruction names no known place: {text}");
            return;
        };
        let candidates: Vec<usize> = (0..self.pois.len()).filter(|&i| self.pois[i].name == name).collect();
        if self.belief.is_none() {
            let pick = if candidates.len() > 1 { self.rng.random_range(0..candidates.len()) } else { 0 };
            self.belief = Some(candidates[pick]);
            self.confirmed = candidates.len() == 1;
            return;
        }
        if let Some(d) = described_distance(text) {
            let best = candidates
                .iter()
                .map(|&i| (i, (self.route_length(here, self.pois[i].pos) - d).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            if let Some((i, _)) = best {
                self.belief = Some(i);
            }
        }
        self.confirmed = true;
    }

    fn steer_towards(&self, here: Vec2, heading: f64, target: Vec2) -> AgentAction {
        let aim = match self.nav.as_ref().map(|n| n.plan_snapped(here, target)) {
            Some(Ok(path)) => path
                .waypoints
                .iter()
                .copied()
                .find(|w| w.distance(here) >= self.cfg.lookahead_m)
                .unwrap_or(target),
            _ => target,
        };
        let err = wrap_angle((aim - here).angle() - heading);
        let tol = self.cfg.heading_tolerance_deg.to_radians();
        if err > tol {
            AgentAction::TurnLeft
        } else if err < -tol {
            AgentAction::TurnRight
        } else {
            AgentAction::Forward
        }
    }

    fn random_action(&mut self) -> AgentAction {
        match self.rng.random_range(0..20) {
            0..=11 => AgentAction::Forward,
            12..=14 => AgentAction::TurnLeft,
            15..=17 => AgentAction::TurnRight,
            _ => AgentAction::Ask,
        }
    }
}

impl Agent for ScriptedAgent {
    fn begin(&mut self, hello: &Hello) {
        self.hail_radius = hello.hail_radius_m;
        self.pois = hello.scene.pois.clone();
        self.nav = Some(Self::build_map(hello, self.cfg.map_resolution, self.cfg.map_inflate));
        self.rng = rng_for(stable_hash(&hello.episode_id), "agent", &[]);
        self.belief = None;
        self.confirmed = false;
        self.want_ask = false;
        self.window = (0, f64::INFINITY);
    }

    fn act(&mut self, obs: &Observation) -> AgentAction {
        if self.policy == Policy::Random {
            return self.random_action();
        }
        let here = obs.pose.position();
        if let Some(text) = &obs.instruction {
            let had_belief = self.belief.is_some();
            self.read_instruction(text, here);
            if had_belief {
                self.want_ask = false;
                self.window = (obs.tick, f64::INFINITY);
            }
        }
        let Some(goal) = self.belief.map(|i| self.pois[i].pos) else {
            return AgentAction::Stop;
        };
        let dist = here.distance(goal);
        let asks = self.policy == Policy::OracleAsk;

        if self.window.1.is_infinite() {
            self.window = (obs.tick, dist);
        } else if obs.tick - self.window.0 >= self.cfg.reask_interval {
            if asks && self.window.1 - dist < self.cfg.reask_progress_m {
                self.want_ask = true;
            }
            self.window = (obs.tick, dist);
        }
        if dist <= self.cfg.arrive_radius {
            if !asks || self.confirmed {
                return AgentAction::Stop;
            }
            self.want_ask = true;
        }
        if self.want_ask {
            let nearest = obs
                .nearby
                .iter()
                .filter(|n| n.kind == NearbyKind::Pedestrian)
                .map(|n| nearby_world_position(&obs.pose, n))
                .min_by(|a, b| a.distance(here).total_cmp(&b.distance(here)));
            return match nearest {
                Some(p) if p.distance(here) < self.hail_radius => AgentAction::Ask,
                Some(p) => self.steer_towards(here, obs.pose.theta, p),
                None => AgentAction::Ask,
            };
        }
        self.steer_towards(here, obs.pose.theta, goal)
    }
}

/// Run one episode in-process, feeding `agent` the same hello and
/// observations a networked agent would receive.
pub fn run_episode(
    world: &World,
    spec: &EpisodeSpec,
    cfg: &EpisodeConfig,
    agent: &mut dyn Agent,
    provider: &dyn InstructionProvider,
    mut sink: Option<&mut dyn EpisodeSink>,
) -> Result<EpisodeLog, TaskError> {
    let mut ep = start_episode(world, spec, cfg, provider)?;
    agent.begin(&build_hello(world, &ep));
    if let Some(s) = sink.as_deref_mut() {
        s.begin(world, &ep);
        s.frame(&ep.frame());
    }
    while ep.is_running() {
        let obs = observe(world, &ep);
        let action = agent.act(&obs);
        let before = ep.tick;
        ep.step(world, action, provider)?;
        if ep.tick != before {
            if let Some(s) = sink.as_deref_mut() {
                s.frame(&ep.frame());
            }
        }
    }
    let log = ep.to_log();
    let metrics = episode_metrics(&log, spec.delta_success_m)?;
    if let Some(s) = sink {
        s.end(&ep, &log, &metrics);
    }
    Ok(log)
}

pub fn run_scripted(
    world: &World,
    spec: &EpisodeSpec,
    cfg: &EpisodeConfig,
    policy: Policy,
    agent_cfg: &AgentConfig,
    provider: &dyn InstructionProvider,
    sink: Option<&mut dyn EpisodeSink>,
) -> Result<EpisodeLog, TaskError> {
    let mut agent = ScriptedAgent::new(policy, agent_cfg.clone());
    run_episode(world, spec, cfg, &mut agent, provider, sink)
}
