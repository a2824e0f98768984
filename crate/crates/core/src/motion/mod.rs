//! Global planning, local social-force dynamics and road traffic.

mod planner;
mod sfm;
mod traffic;

pub use planner::{plan_path, step_cost, GridPath, NavGrid, PlanError};
pub use sfm::{
    sfm_force, step_bodies, substeps, waypoint_direction, BodyState, MotionError, SfmParams, Steering, LOOKAHEAD_M,
    WAYPOINT_REACHED_M,
};
pub use traffic::{
    step_vehicles, RoadEdge, RouteGraph, Vehicle, VehiclePose, LANE_HALF_WIDTH_M, VEHICLE_WIDTH_M, YIELD_DISTANCE_M,
};
