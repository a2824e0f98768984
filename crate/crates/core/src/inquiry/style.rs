use serde::{Deserialize, Serialize};

use crate::crowd::{Gender, PersonProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkUse {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionType {
    Egocentric,
    Cardinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceDescription {
    Vague,
    Precise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceLength {
    Short,
    Medium,
    Long,
}

impl UtteranceLength {
    pub fn level(self) -> u32 {
        match self {
            UtteranceLength::Short => 0,
            UtteranceLength::Medium => 1,
            UtteranceLength::Long => 2,
        }
    }

    fn bumped(self) -> Self {
        match self {
            UtteranceLength::Short => UtteranceLength::Medium,
            _ => UtteranceLength::Long,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    Route,
    Survey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NavStyle {
    pub landmark_use: LandmarkUse,
    pub direction_type: DirectionType,
    pub distance_description: DistanceDescription,
    pub utterance_length: UtteranceLength,
    pub perspective: Perspective,
}

impl NavStyle {
    /// Style used when no pedestrian is available to give the first instruction.
    pub const NEUTRAL: NavStyle = NavStyle {
        landmark_use: LandmarkUse::Low,
        direction_type: DirectionType::Egocentric,
        distance_description: DistanceDescription::Precise,
        utterance_length: UtteranceLength::Short,
        perspective: Perspective::Route,
    };

    /// Survey instructions are map-like, so they must use cardinal directions.
    pub fn is_consistent(&self) -> bool {
        self.perspective == Perspective::Route || self.direction_type == DirectionType::Cardinal
    }
}

/// Familiarity at or above this makes a giver describe the route map-style.
pub const SURVEY_FAMILIARITY: f64 = 0.7;

/// Cultures whose irregular street layouts favour landmark references.
pub const LANDMARK_CULTURES: [&str; 3] = ["european", "east_asian", "middle_eastern"];

pub fn derive_nav_style(profile: &PersonProfile) -> NavStyle {
    let survey = profile.region_familiarity >= SURVEY_FAMILIARITY;
    let (perspective, direction_type, distance_description) = if survey {
        (Perspective::Survey, DirectionType::Cardinal, DistanceDescription::Precise)
    } else {
        (Perspective::Route, DirectionType::Egocentric, DistanceDescription::Vague)
    };
    let landmark_use = if perspective == Perspective::Route || LANDMARK_CULTURES.contains(&profile.culture.as_str()) {
        LandmarkUse::High
    } else {
        LandmarkUse::Low
    };
    let mut utterance_length = if profile.verbosity < 1.0 / 3.0 {
        UtteranceLength::Short
    } else if profile.verbosity < 2.0 / 3.0 {
        UtteranceLength::Medium
    } else {
        UtteranceLength::Long
    };
    if profile.gender == Gender::Female {
        utterance_length = utterance_length.bumped();
    }
    NavStyle { landmark_use, direction_type, distance_description, utterance_length, perspective }
}
