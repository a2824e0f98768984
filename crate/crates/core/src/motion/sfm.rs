//! Circular-body social force model and its fixed-step integrator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Segment, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub radius: f64,
    pub v_desired: f64,
    pub mass: f64,
}

impl BodyState {
    pub fn at_rest(id: u32, position: Vec2, heading: f64) -> Self {
        BodyState {
            id,
            position,
            velocity: Vec2::ZERO,
            heading: wrap_angle(heading),
            radius: 0.3,
            v_desired: 1.34,
            mass: 80.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfmParams {
    /// Relaxation time, s.
    pub tau: f64,
    /// Body repulsion strength, N.
    pub a: f64,
    /// Body repulsion range, m.
    pub b: f64,
    pub wall_a: f64,
    pub wall_b: f64,
    /// Integration substep, s.
    pub dt: f64,
    pub v_max: f64,
    /// Repulsion magnitude used when two centers coincide.
    pub force_cap: f64,
}

impl Default for SfmParams {
    fn default() -> Self {
        SfmParams { tau: 0.5, a: 2000.0, b: 0.08, wall_a: 2000.0, wall_b: 0.08, dt: 0.1, v_max: 1.8, force_cap: 5000.0 }
    }
}

impl SfmParams {
    pub fn validate(&self) -> Result<(), MotionError> {
        let all = [self.tau, self.a, self.b, self.wall_a, self.wall_b, self.dt, self.v_max, self.force_cap];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(MotionError::BadParams)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MotionError {
    #[error("social force parameters must all be positive and finite")]
    BadParams,
    #[error("tick of {tick} s is not a positive whole number of {dt} s substeps")]
    BadSubstep { tick: f64, dt: f64 },
    #[error("bodies and steering lists differ in length")]
    LengthMismatch,
}

/// Lookahead for picking the steering target along a waypoint list.
pub const LOOKAHEAD_M: f64 = 1.0;
/// Waypoints closer than this are consumed.
pub const WAYPOINT_REACHED_M: f64 = 0.3;
const HEADING_MIN_SPEED: f64 = 0.05;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// How a body chooses its goal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Steering {
    /// Follow waypoints; decelerate once the list is exhausted.
    Waypoints(VecDeque<Vec2>),
    /// Drive along the current heading; heading is not re-derived from velocity.
    Heading,
    /// Stationary obstacle for others; velocity forced to zero.
    Hold,
}

fn coincident_axis(me: u32, other: u32) -> Vec2 {
    let axis = Vec2::from_angle(GOLDEN_ANGLE * (me.min(other) as f64 + 1.0));
    if me < other {
        axis
    } else if me > other {
        -axis
    } else {
        Vec2::new(1.0, 0.0)
    }
}

/// Total social force on `body`.
pub fn sfm_force(body: &BodyState, goal_dir: Vec2, neighbors: &[BodyState], walls: &[Segment], params: &SfmParams) -> Vec2 {
    let mut f = (goal_dir * body.v_desired - body.velocity) * (body.mass / params.tau);
    for other in neighbors {
        let diff = body.position - other.position;
        let d = diff.norm();
        if d < 1e-9 {
            f += coincident_axis(body.id, other.id) * params.force_cap;
        } else {
            let mag = params.a * ((body.radius + other.radius - d) / params.b).exp();
            f += diff / d * mag;
        }
    }
    for w in walls {
        let closest = w.closest_point(body.position);
        let diff = body.position - closest;
        let d = diff.norm();
        let n = if d < 1e-9 { (w.b - w.a).perp().normalized() } else { diff / d };
        f += n * (params.wall_a * ((body.radius - d) / params.wall_b).exp());
    }
    f
}

fn final_release_distance(speed: f64, params: &SfmParams) -> f64 {
    // distance covered while relaxing to rest under semi-implicit Euler
    WAYPOINT_REACHED_M.max(speed * (params.tau - params.dt).max(0.0))
}

/// Goal direction for a waypoint follower, consuming reached waypoints.
pub fn waypoint_direction(body: &BodyState, waypoints: &mut VecDeque<Vec2>, params: &SfmParams) -> Vec2 {
    while let Some(&front) = waypoints.front() {
        let d = front.distance(body.position);
        let reach = if waypoints.len() == 1 { final_release_distance(body.speed(), params) } else { WAYPOINT_REACHED_M };
        if d < reach {
            waypoints.pop_front();
        } else {
            break;
        }
    }
    let Some(&first) = waypoints.front() else {
        return Vec2::ZERO;
    };
    let target = waypoints
        .iter()
        .take_while(|w| w.distance(body.position) <= LOOKAHEAD_M)
        .last()
        .copied()
        .unwrap_or(first);
    (target - body.position).normalized()
}

/// Number of integration substeps in a tick.
pub fn substeps(dt_tick: f64, params: &SfmParams) -> Result<usize, MotionError> {
    let n = (dt_tick / params.dt).round();
    if !(dt_tick > 0.0) || !(params.dt > 0.0) || n < 1.0 || (n * params.dt - dt_tick).abs() > 1e-9 {
        return Err(MotionError::BadSubstep { tick: dt_tick, dt: params.dt });
    }
    Ok(n as usize)
}

/// Advance all bodies by one tick. Forces in each substep are evaluated
/// against the previous substep's snapshot, then applied together.
pub fn step_bodies(
    bodies: &mut [BodyState],
    steering: &mut [Steering],
    walls: &[Segment],
    params: &SfmParams,
    dt_tick: f64,
) -> Result<(), MotionError> {
    if bodies.len() != steering.len() {
        return Err(MotionError::LengthMismatch);
    }
    params.validate()?;
    let n = substeps(dt_tick, params)?;
    let dt = params.dt;
    let mut others: Vec<BodyState> = Vec::with_capacity(bodies.len());
    for _ in 0..n {
        let snapshot = bodies.to_vec();
        for (i, (body, steer)) in bodies.iter_mut().zip(steering.iter_mut()).enumerate() {
            let goal_dir = match steer {
                Steering::Hold => {
                    body.velocity = Vec2::ZERO;
                    continue;
                }
                Steering::Heading => Vec2::from_angle(body.heading),
                Steering::Waypoints(wps) => waypoint_direction(&snapshot[i], wps, params),
            };
            others.clear();
            others.extend(snapshot.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| b.clone()));
            let force = sfm_force(&snapshot[i], goal_dir, &others, walls, params);
            let mut v = body.velocity + force * (dt / body.mass);
            let speed = v.norm();
            if speed > params.v_max {
                v = v * (params.v_max / speed);
            }
            body.velocity = v;
            body.position += v * dt;
            if !matches!(steer, Steering::Heading) && v.norm() > HEADING_MIN_SPEED {
                body.heading = wrap_angle(v.angle());
            }
        }
    }
    Ok(())
}
