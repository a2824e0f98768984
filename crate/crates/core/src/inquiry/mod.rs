//! Navigation styles and natural-language direction giving.

mod compose;
mod provider;
mod sketch;
mod style;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::Poi;

pub use compose::{render_template, rounded_distance, DISTANCE_ROUNDING_M};
pub use provider::{
    GoalRef, HttpProvider, InstructionProvider, InstructionRequest, ProviderError, ProviderReply, TemplateProvider,
    DEFAULT_TIMEOUT, LLM_ENDPOINT_ENV,
};
pub use sketch::{
    sketch_polyline, sketch_route, Cardinal, LandmarkRef, RouteSketch, Side, SketchConfig, SketchSegment, Turn,
};
pub use style::{
    derive_nav_style, DirectionType, DistanceDescription, LandmarkUse, NavStyle, Perspective, UtteranceLength,
    LANDMARK_CULTURES, SURVEY_FAMILIARITY,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InquiryError {
    #[error("cannot sketch an empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionResult {
    pub text: String,
    pub style: NavStyle,
    pub giver_id: String,
    pub goal_poi_id: String,
    pub word_count: usize,
    /// Set when the configured provider failed and the template was used instead.
    #[serde(default)]
    pub fallback: bool,
}

/// Turn a sketch into an instruction through `provider`, falling back to
/// the template renderer when the provider fails.
pub fn compose_instruction(
    sketch: &RouteSketch,
    style: &NavStyle,
    goal: &Poi,
    giver_id: &str,
    profile_summary: &str,
    provider: &dyn InstructionProvider,
) -> InstructionResult {
    let request = InstructionRequest {
        sketch: sketch.clone(),
        style: *style,
        goal: GoalRef { id: goal.id.clone(), name: goal.name.clone() },
        profile_summary: profile_summary.to_string(),
    };
    let (text, fallback) = match provider.compose(&request) {
        Ok(text) => (text, false),
        Err(e) => {
            log::warn!("instruction provider `{}` failed, using template: {e}", provider.name());
            let text = TemplateProvider.compose(&request).expect("template provider cannot fail");
            (text, true)
        }
    };
    assert!(!text.trim().is_empty(), "instruction text is never empty");
    InstructionResult {
        word_count: text.split_whitespace().count(),
        text,
        style: *style,
        giver_id: giver_id.to_string(),
        goal_poi_id: goal.id.clone(),
        fallback,
    }
}
