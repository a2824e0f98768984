use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fsm::{FsmState, PedestrianFsm};
use super::profile::{generate_profile, PersonProfile};
use super::schedule::{generate_schedule, Schedule};
use super::CrowdError;
use crate::geom::{Segment, Vec2};
use crate::inquiry::{
    compose_instruction, derive_nav_style, sketch_polyline, sketch_route, InstructionProvider, InstructionResult,
    NavStyle, SketchConfig,
};
use crate::motion::{step_bodies, BodyState, GridPath, MotionError, NavGrid, SfmParams, Steering};
use crate::scene::Scene;
use crate::seeding::rng_for;

/// Fixed pause before any answer, s.
pub const ANSWER_BASE_S: f64 = 2.0;
/// Extra pause per utterance-length level, s.
pub const ANSWER_PER_LEVEL_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub profile: PersonProfile,
    pub schedule: Schedule,
    pub fsm: PedestrianFsm,
    pub body: BodyState,
    #[serde(skip)]
    pub path: Option<GridPath>,
    pub nav_style: NavStyle,
    #[serde(skip)]
    pub route: VecDeque<Vec2>,
    #[serde(skip)]
    pub current_entry: Option<usize>,
    #[serde(skip)]
    pub failed_entry: Option<usize>,
    /// POI ids in the order activities were started there.
    #[serde(skip)]
    pub visited: Vec<String>,
}

/// Read-only world a pedestrian needs to plan and move.
#[derive(Clone, Copy)]
pub struct CrowdContext<'a> {
    pub scene: &'a Scene,
    pub nav: &'a NavGrid,
    pub walls: &'a [Segment],
    pub params: &'a SfmParams,
}

impl Pedestrian {
    pub fn new(profile: PersonProfile, schedule: Schedule, body: BodyState) -> Self {
        let nav_style = derive_nav_style(&profile);
        Pedestrian {
            profile,
            schedule,
            fsm: PedestrianFsm::default(),
            body,
            path: None,
            nav_style,
            route: VecDeque::new(),
            current_entry: None,
            failed_entry: None,
            visited: Vec::new(),
        }
    }

    pub fn state(&self) -> FsmState {
        self.fsm.state
    }

    pub fn steering(&self) -> Steering {
        match self.fsm.state {
            FsmState::Walk => Steering::Waypoints(self.route.clone()),
            _ => Steering::Hold,
        }
    }

    /// High and mid level: pick the active entry, plan towards it, resume
    /// after answering. Runs before bodies move.
    pub fn plan_tick(&mut self, ctx: &CrowdContext<'_>, sim_time: f64) {
        if self.fsm.state == FsmState::AnswerInquiry {
            if sim_time >= self.fsm.answer_until {
                self.fsm.resume(sim_time);
            } else {
                self.body.velocity = Vec2::ZERO;
                return;
            }
        }
        let active = self.schedule.active_entry(sim_time);
        if active != self.current_entry {
            self.current_entry = active;
            self.failed_entry = None;
            match self.fsm.state {
                FsmState::PerformActivity => self.fsm.go(FsmState::Idle, sim_time),
                FsmState::Walk => {
                    self.route.clear();
                    self.path = None;
                    let to = if active.is_some() { FsmState::PlanPath } else { FsmState::Idle };
                    self.fsm.go(to, sim_time);
                }
                _ => {}
            }
        }
        if self.fsm.state == FsmState::Idle {
            if let Some(i) = active {
                if self.failed_entry != Some(i) {
                    self.fsm.go(FsmState::PlanPath, sim_time);
                }
            }
        }
        if self.fsm.state == FsmState::PlanPath {
            let i = active.expect("PlanPath only with an active entry");
            let entry = &self.schedule.entries[i];
            let target = ctx.scene.poi(&entry.poi_id).map(|p| p.position);
            match target.ok_or(crate::motion::PlanError::GoalBlocked).and_then(|g| ctx.nav.plan_snapped(self.body.position, g)) {
                Ok(path) => {
                    self.route = path.waypoints.iter().copied().collect();
                    self.path = Some(path);
                    self.fsm.go(FsmState::Walk, sim_time);
                }
                Err(e) => {
                    log::debug!("{}: cannot reach {} ({e}); idling until next entry", self.profile.id, entry.poi_id);
                    self.failed_entry = Some(i);
                    self.fsm.go(FsmState::Idle, sim_time);
                }
            }
        }
        if self.fsm.state != FsmState::Walk {
            self.body.velocity = Vec2::ZERO;
        }
    }

    /// Low level follow-up after bodies moved: detect arrival.
    pub fn after_motion(&mut self, ctx: &CrowdContext<'_>, sim_time: f64) {
        if self.fsm.state != FsmState::Walk {
            return;
        }
        let Some(i) = self.current_entry else { return };
        let entry = &self.schedule.entries[i];
        let Some(poi) = ctx.scene.poi(&entry.poi_id) else { return };
        let path_end = self.path.as_ref().and_then(|p| p.waypoints.last().copied()).unwrap_or(poi.position);
        let here = self.body.position;
        if here.distance(poi.position) <= poi.approach_radius || here.distance(path_end) <= poi.approach_radius {
            self.fsm.activity_until = entry.end;
            self.visited.push(poi.id.clone());
            self.route.clear();
            self.body.velocity = Vec2::ZERO;
            self.fsm.go(FsmState::PerformActivity, sim_time);
        }
    }
}

/// Advance one pedestrian alone for `dt` seconds.
pub fn step_pedestrian(
    mut ped: Pedestrian,
    ctx: &CrowdContext<'_>,
    sim_time: f64,
    dt: f64,
) -> Result<Pedestrian, MotionError> {
    step_crowd(std::slice::from_mut(&mut ped), &mut [], &mut [], ctx, sim_time, dt)?;
    Ok(ped)
}

/// Advance all pedestrians together with extra bodies (typically the agent)
/// that share the same force field. Planning runs in parallel; motion is
/// one synchronous integration over every body.
pub fn step_crowd(
    peds: &mut [Pedestrian],
    extra_bodies: &mut [BodyState],
    extra_steering: &mut [Steering],
    ctx: &CrowdContext<'_>,
    sim_time: f64,
    dt: f64,
) -> Result<(), MotionError> {
    if extra_bodies.len() != extra_steering.len() {
        return Err(MotionError::LengthMismatch);
    }
    peds.par_iter_mut().for_each(|p| p.plan_tick(ctx, sim_time));

    let mut bodies: Vec<BodyState> = extra_bodies.to_vec();
    bodies.extend(peds.iter().map(|p| p.body.clone()));
    let mut steering: Vec<Steering> = extra_steering.to_vec();
    steering.extend(peds.iter().map(Pedestrian::steering));
    step_bodies(&mut bodies, &mut steering, ctx.walls, ctx.params, dt)?;

    let k = extra_bodies.len();
    extra_bodies.clone_from_slice(&bodies[..k]);
    extra_steering.clone_from_slice(&steering[..k]);
    let end_time = sim_time + dt;
    for ((p, b), s) in peds.iter_mut().zip(bodies.into_iter().skip(k)).zip(steering.into_iter().skip(k)) {
        p.body = b;
        if let Steering::Waypoints(wps) = s {
            p.route = wps;
        }
        p.after_motion(ctx, end_time);
    }
    Ok(())
}

/// Keep spawned bodies at least this far from `keep_clear` points, meters.
pub const SPAWN_CLEARANCE_M: f64 = 1.5;

/// Build pedestrian `index`: profile, schedule and a free spawn position
/// away from `keep_clear`. Body ids start at 1; 0 is reserved for the agent.
pub fn spawn_pedestrian(index: u64, seed: u64, scene: &Scene, nav: &NavGrid, keep_clear: &[Vec2]) -> Pedestrian {
    let profile = generate_profile(seed, index);
    let schedule = generate_schedule(&profile, scene, seed);
    let mut rng = rng_for(seed, "spawn", &[index]);
    let b = scene.bounds;
    let mut position = None;
    for _ in 0..1000 {
        let p = Vec2::new(rng.random_range(b.min.x..b.max.x), rng.random_range(b.min.y..b.max.y));
        if nav.is_free_point(p) && keep_clear.iter().all(|q| q.distance(p) >= SPAWN_CLEARANCE_M) {
            position = Some(p);
            break;
        }
    }
    let position = position
        .or_else(|| nav.nearest_free(b.min + (b.max - b.min) * 0.5).map(|c| nav.center(c)))
        .unwrap_or(b.min + (b.max - b.min) * 0.5);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let body = BodyState::at_rest(index as u32 + 1, position, heading);
    Pedestrian::new(profile, schedule, body)
}

/// Everything a pedestrian needs to turn a question into directions.
#[derive(Clone, Copy)]
pub struct InquiryContext<'a> {
    pub scene: &'a Scene,
    pub nav: &'a NavGrid,
    pub sketch: &'a SketchConfig,
    pub provider: &'a dyn InstructionProvider,
}

/// Plan a route from the asker to the goal and describe it. Shared with
/// the synthetic giver used when no pedestrian is around.
pub fn give_directions(
    asker_position: Vec2,
    asker_heading: f64,
    goal: &crate::scene::Poi,
    style: &NavStyle,
    giver_id: &str,
    profile_summary: &str,
    ctx: &InquiryContext<'_>,
) -> InstructionResult {
    let cfg = SketchConfig { initial_heading: Some(asker_heading), exclude_name: Some(goal.name.clone()), ..ctx.sketch.clone() };
    let sketch = match ctx.nav.plan_snapped(asker_position, goal.position) {
        Ok(path) => sketch_route(&path, ctx.scene, &cfg),
        Err(_) => sketch_polyline(&[asker_position, goal.position], ctx.scene, &cfg),
    }
    .expect("route sketches are never empty");
    compose_instruction(&sketch, style, goal, giver_id, profile_summary, ctx.provider)
}

/// Stop the pedestrian, answer, and hold it in `AnswerInquiry` for a pause
/// proportional to its utterance length.
pub fn receive_inquiry(
    ped: &mut Pedestrian,
    asker_position: Vec2,
    asker_heading: f64,
    goal: &crate::scene::Poi,
    sim_time: f64,
    ctx: &InquiryContext<'_>,
) -> Result<InstructionResult, CrowdError> {
    if ped.fsm.state == FsmState::AnswerInquiry {
        return Err(CrowdError::Busy(ped.profile.id.clone()));
    }
    let until = sim_time + ANSWER_BASE_S + ANSWER_PER_LEVEL_S * ped.nav_style.utterance_length.level() as f64;
    ped.fsm.interrupt(sim_time, until);
    ped.body.velocity = Vec2::ZERO;
    Ok(give_directions(
        asker_position,
        asker_heading,
        goal,
        &ped.nav_style,
        &ped.profile.id,
        &ped.profile.summary(),
        ctx,
    ))
}
