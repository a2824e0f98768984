//! Route-graph vehicles: arclength advance, deterministic successor edges
//! and a single yield rule.

use serde::{Deserialize, Serialize};

use crate::geom::{ConvexPolygon, Vec2};

/// Bodies this far ahead of a vehicle's front (plus their radius) make it halt.
pub const YIELD_DISTANCE_M: f64 = 3.0;
pub const LANE_HALF_WIDTH_M: f64 = 1.5;
pub const VEHICLE_WIDTH_M: f64 = 1.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    /// m/s
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub edge: usize,
    /// Position of the vehicle front along the edge, meters.
    pub arclength: f64,
    /// Cruise speed, m/s.
    pub speed: f64,
    pub length: f64,
    /// True when the yield rule stopped the vehicle on its last step.
    #[serde(default)]
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteGraph {
    #[serde(default)]
    pub nodes: Vec<Vec2>,
    #[serde(default)]
    pub edges: Vec<RoadEdge>,
    #[serde(default)]
    pub vehicles: Vec<Vehicle>,
}

/// Pose of a vehicle front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehiclePose {
    pub position: Vec2,
    pub heading: f64,
}

impl RouteGraph {
    pub fn validate(&self) -> Result<(), String> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                return Err(format!("edge {i} references a missing node"));
            }
            if e.from == e.to || self.edge_length(i) <= 0.0 {
                return Err(format!("edge {i} has zero length"));
            }
            if !(e.speed_limit > 0.0) {
                return Err(format!("edge {i} needs a positive speed limit"));
            }
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.edge >= self.edges.len() {
                return Err(format!("vehicle {i} references a missing edge"));
            }
            if !(0.0..=self.edge_length(v.edge)).contains(&v.arclength) {
                return Err(format!("vehicle {i} arclength outside its edge"));
            }
            if !(v.speed >= 0.0) || !(v.length > 0.0) {
                return Err(format!("vehicle {i} needs non-negative speed and positive length"));
            }
        }
        Ok(())
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        self.nodes[e.from].distance(self.nodes[e.to])
    }

    pub fn edge_dir(&self, edge: usize) -> Vec2 {
        let e = &self.edges[edge];
        (self.nodes[e.to] - self.nodes[e.from]).normalized()
    }

    /// Lowest-id edge leaving the end node of `edge`.
    pub fn successor(&self, edge: usize) -> Option<usize> {
        let end = self.edges[edge].to;
        self.edges.iter().position(|e| e.from == end)
    }

    pub fn vehicle_pose(&self, v: &Vehicle) -> VehiclePose {
        let dir = self.edge_dir(v.edge);
        VehiclePose { position: self.nodes[self.edges[v.edge].from] + dir * v.arclength, heading: dir.angle() }
    }

    /// Rectangle trailing back `length` from the front, `VEHICLE_WIDTH_M` wide.
    pub fn vehicle_footprint(&self, v: &Vehicle) -> ConvexPolygon {
        let pose = self.vehicle_pose(v);
        let dir = Vec2::from_angle(pose.heading);
        let side = dir.perp() * (VEHICLE_WIDTH_M / 2.0);
        let back = pose.position - dir * v.length;
        ConvexPolygon::new(vec![back - side, pose.position - side, pose.position + side, back + side])
            .expect("vehicle rectangle is convex")
    }

    fn blocked_ahead(&self, v: &Vehicle, bodies: &[(Vec2, f64)]) -> bool {
        let pose = self.vehicle_pose(v);
        let dir = Vec2::from_angle(pose.heading);
        bodies.iter().any(|&(p, r)| {
            let rel = p - pose.position;
            let along = rel.dot(dir);
            let lateral = rel.cross(dir).abs();
            along >= -r && along <= YIELD_DISTANCE_M + r && lateral <= LANE_HALF_WIDTH_M + r
        })
    }
}

/// Advance every vehicle by `dt`. `bodies` are `(position, radius)` of
/// pedestrians and agents used by the yield rule.
pub fn step_vehicles(graph: &mut RouteGraph, bodies: &[(Vec2, f64)], dt: f64) {
    for i in 0..graph.vehicles.len() {
        let mut v = graph.vehicles[i].clone();
        if graph.blocked_ahead(&v, bodies) {
            v.halted = true;
            graph.vehicles[i] = v;
            continue;
        }
        v.halted = false;
        v.arclength += v.speed.min(graph.edges[v.edge].speed_limit) * dt;
        loop {
            let len = graph.edge_length(v.edge);
            if v.arclength <= len {
                break;
            }
            match graph.successor(v.edge) {
                Some(next) => {
                    v.arclength -= len;
                    v.edge = next;
                }
                None => {
                    v.arclength = len;
                    break;
                }
            }
        }
        graph.vehicles[i] = v;
    }
}
