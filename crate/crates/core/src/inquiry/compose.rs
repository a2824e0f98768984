//! Deterministic template rendering of a route sketch.

use super::sketch::{RouteSketch, Side, SketchSegment, Turn};
use super::style::{DirectionType, DistanceDescription, LandmarkUse, NavStyle, UtteranceLength};

/// Precise distances are rounded to this many meters.
pub const DISTANCE_ROUNDING_M: f64 = 5.0;

const OPENERS: [&str; 4] = ["Sure.", "Oh, I know that place.", "Yes, of course.", "Let me think for a second."];
const CLOSERS: [&str; 4] = [
    "You really cannot miss it once you get there.",
    "If you get lost, just ask someone else along the way.",
    "I hope that helps, and have a nice day.",
    "It is easy to find, but take your time.",
];

pub fn rounded_distance(length: f64) -> u64 {
    ((length / DISTANCE_ROUNDING_M).round() * DISTANCE_ROUNDING_M) as u64
}

fn distance_phrase(length: f64, style: &NavStyle) -> String {
    match style.distance_description {
        DistanceDescription::Precise => match rounded_distance(length) {
            0 => "for a few steps".to_string(),
            m => format!("for {m} meters"),
        },
        DistanceDescription::Vague => {
            let bucket = if length < 20.0 {
                "a short way"
            } else if length < 60.0 {
                "a while"
            } else {
                "quite far"
            };
            format!("for {bucket}")
        }
    }
}

fn direction_phrase(seg: &SketchSegment, first: bool, style: &NavStyle) -> String {
    match style.direction_type {
        DirectionType::Cardinal => format!("head {}", seg.cardinal.word()),
        DirectionType::Egocentric => match (seg.turn, first) {
            (Turn::Straight, true) => "go straight".into(),
            (Turn::Straight, false) => "keep going straight".into(),
            (Turn::Left, _) => "turn left and walk".into(),
            (Turn::Right, _) => "turn right and walk".into(),
        },
    }
}

fn landmark_phrase(seg: &SketchSegment, style: &NavStyle) -> Option<String> {
    if style.landmark_use != LandmarkUse::High {
        return None;
    }
    let lm = seg.landmark.as_ref()?;
    Some(match style.direction_type {
        DirectionType::Egocentric => {
            let side = match lm.side {
                Side::Left => "left",
                Side::Right => "right",
            };
            format!("passing {} on your {side}", lm.name)
        }
        DirectionType::Cardinal => format!("past {}", lm.name),
    })
}

fn pick<'a>(list: &[&'a str], sketch: &RouteSketch, goal_name: &str) -> &'a str {
    list[(sketch.segments.len() + goal_name.len()) % list.len()]
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Render the route as one sentence of clauses, padded with fillers by
/// utterance length. Pure: identical inputs give identical text.
pub fn render_template(sketch: &RouteSketch, style: &NavStyle, goal_name: &str) -> String {
    let mut clauses = Vec::with_capacity(sketch.segments.len());
    let mut last_has_landmark = false;
    for (i, seg) in sketch.segments.iter().enumerate() {
        let mut clause = format!("{} {}", direction_phrase(seg, i == 0, style), distance_phrase(seg.length, style));
        last_has_landmark = false;
        if let Some(lm) = landmark_phrase(seg, style) {
            clause.push_str(", ");
            clause.push_str(&lm);
            last_has_landmark = true;
        }
        clauses.push(clause);
    }
    let joined = capitalize(&clauses.join(", then "));
    let sep = if last_has_landmark { ", " } else { " " };
    let core = format!("{joined}{sep}to reach {goal_name}.");
    match style.utterance_length {
        UtteranceLength::Short => core,
        UtteranceLength::Medium => format!("{} {core}", pick(&OPENERS, sketch, goal_name)),
        UtteranceLength::Long => {
            let walk = if sketch.total_length < 20.0 {
                "It is only a short walk from here."
            } else if sketch.total_length < 60.0 {
                "It is not too far from here."
            } else {
                "It is a bit of a walk from here."
            };
            format!("{} {core} {walk} {}", pick(&OPENERS, sketch, goal_name), pick(&CLOSERS, sketch, goal_name))
        }
    }
}
