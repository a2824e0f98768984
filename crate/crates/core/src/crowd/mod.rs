//! Pedestrian population: profiles, daily schedules, the activity state
//! machine and answering direction inquiries.

mod fsm;
mod pedestrian;
mod profile;
mod schedule;

use thiserror::Error;

pub use fsm::{is_allowed_transition, FsmState, PedestrianFsm, Transition};
pub use pedestrian::{
    give_directions, receive_inquiry, spawn_pedestrian, step_crowd, step_pedestrian, CrowdContext, InquiryContext,
    Pedestrian, ANSWER_BASE_S, ANSWER_PER_LEVEL_S, SPAWN_CLEARANCE_M,
};
pub use profile::{generate_profile, Gender, PersonProfile, AGE_MEAN, AGE_RANGE, AGE_SD, CULTURES, OCCUPATIONS};
pub use schedule::{
    compatible_activities, generate_schedule, Activity, Schedule, ScheduleEntry, DAY_END_S, DAY_START_S,
    ENTRY_COUNT, MAX_IDLE_GAP_S,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrowdError {
    #[error("pedestrian {0} is busy answering another inquiry")]
    Busy(String),
}
