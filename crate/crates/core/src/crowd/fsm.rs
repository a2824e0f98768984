use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    Idle,
    PlanPath,
    Walk,
    PerformActivity,
    AnswerInquiry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub time: f64,
    pub from: FsmState,
    pub to: FsmState,
}

/// Declared edges of the pedestrian state machine.
///
/// Besides the activity cycle, a schedule-entry change forces `PlanPath`
/// from `Walk`, and an entry ending mid-walk drops back to `Idle`.
pub fn is_allowed_transition(from: FsmState, to: FsmState) -> bool {
    use FsmState::*;
    match (from, to) {
        (AnswerInquiry, AnswerInquiry) => false,
        (_, AnswerInquiry) => true,
        (AnswerInquiry, _) => true,
        (Idle, PlanPath) | (PlanPath, Walk) | (PlanPath, Idle) => true,
        (Walk, PerformActivity) | (Walk, PlanPath) | (Walk, Idle) => true,
        (PerformActivity, Idle) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianFsm {
    pub state: FsmState,
    pub resume_state: Option<FsmState>,
    pub activity_until: f64,
    pub answer_until: f64,
    #[serde(skip)]
    pub log: Vec<Transition>,
}

impl Default for PedestrianFsm {
    fn default() -> Self {
        PedestrianFsm { state: FsmState::Idle, resume_state: None, activity_until: 0.0, answer_until: 0.0, log: Vec::new() }
    }
}

impl PedestrianFsm {
    pub(crate) fn go(&mut self, to: FsmState, time: f64) {
        debug_assert!(is_allowed_transition(self.state, to), "undeclared transition {:?} -> {to:?}", self.state);
        self.log.push(Transition { time, from: self.state, to });
        self.state = to;
    }

    pub(crate) fn interrupt(&mut self, time: f64, answer_until: f64) {
        self.resume_state = Some(self.state);
        self.answer_until = answer_until;
        self.go(FsmState::AnswerInquiry, time);
    }

    pub(crate) fn resume(&mut self, time: f64) {
        let back = self.resume_state.take().unwrap_or(FsmState::Idle);
        self.go(back, time);
    }
}
