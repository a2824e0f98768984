//! Path → route sketch: simplify a grid path into a few straight legs with
//! turn labels, compass octants and nearby landmarks.

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Segment, Vec2};
use crate::motion::GridPath;
use crate::scene::Scene;

use super::InquiryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Left,
    Right,
    Straight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cardinal {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Cardinal {
    /// Compass octant of a heading measured counter-clockwise from +x (east).
    pub fn from_heading(theta: f64) -> Self {
        const CCW_FROM_EAST: [Cardinal; 8] =
            [Cardinal::E, Cardinal::NE, Cardinal::N, Cardinal::NW, Cardinal::W, Cardinal::SW, Cardinal::S, Cardinal::SE];
        let k = (theta / std::f64::consts::FRAC_PI_4).round().rem_euclid(8.0) as usize;
        CCW_FROM_EAST[k]
    }

    pub fn word(self) -> &'static str {
        match self {
            Cardinal::N => "north",
            Cardinal::NE => "northeast",
            Cardinal::E => "east",
            Cardinal::SE => "southeast",
            Cardinal::S => "south",
            Cardinal::SW => "southwest",
            Cardinal::W => "west",
            Cardinal::NW => "northwest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRef {
    pub poi_id: String,
    pub name: String,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchSegment {
    pub length: f64,
    pub turn: Turn,
    pub cardinal: Cardinal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<LandmarkRef>,
    /// Chord endpoints, meters.
    pub start: Vec2,
    pub end: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSketch {
    pub segments: Vec<SketchSegment>,
    pub total_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SketchConfig {
    pub corridor_radius: f64,
    /// Vertices turning less than this (degrees) are merged away.
    pub merge_deg: f64,
    /// Vertices turning at least this much (degrees) are announced as turns.
    pub turn_deg: f64,
    /// Douglas–Peucker tolerance that removes grid staircase, meters.
    pub simplify_tolerance: f64,
    /// Asker's heading; lets the first leg carry a turn.
    pub initial_heading: Option<f64>,
    /// POI name never used as a landmark (the destination's own name).
    pub exclude_name: Option<String>,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            corridor_radius: 25.0,
            merge_deg: 20.0,
            turn_deg: 45.0,
            simplify_tolerance: 0.75,
            initial_heading: None,
            exclude_name: None,
        }
    }
}

pub fn sketch_route(path: &GridPath, scene: &Scene, cfg: &SketchConfig) -> Result<RouteSketch, InquiryError> {
    sketch_polyline(&path.waypoints, scene, cfg)
}

fn douglas_peucker(points: &[Vec2], tol: f64, lo: usize, hi: usize, keep: &mut Vec<bool>) {
    if hi <= lo + 1 {
        return;
    }
    let chord = Segment::new(points[lo], points[hi]);
    let (idx, dist) = (lo + 1..hi)
        .map(|i| (i, chord.distance_to(points[i])))
        .fold((lo, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if dist > tol {
        keep[idx] = true;
        douglas_peucker(points, tol, lo, idx, keep);
        douglas_peucker(points, tol, idx, hi, keep);
    }
}

fn classify(change: f64, turn_rad: f64) -> Turn {
    if change.abs() < turn_rad {
        Turn::Straight
    } else if change > 0.0 {
        Turn::Left
    } else {
        Turn::Right
    }
}

/// Sketch an arbitrary polyline. Segment lengths are arc lengths of the
/// original polyline, so they sum to its total length.
pub fn sketch_polyline(points: &[Vec2], scene: &Scene, cfg: &SketchConfig) -> Result<RouteSketch, InquiryError> {
    if points.is_empty() {
        return Err(InquiryError::EmptyPath);
    }
    let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    let mut arc = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        arc[i] = arc[i - 1] + pts[i].distance(pts[i - 1]);
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    *keep.last_mut().unwrap() = true;
    douglas_peucker(&pts, cfg.simplify_tolerance, 0, pts.len() - 1, &mut keep);
    let candidates: Vec<usize> = (0..pts.len()).filter(|&i| keep[i]).collect();

    let merge_rad = cfg.merge_deg.to_radians();
    let mut breaks = vec![candidates[0]];
    for w in 1..candidates.len() {
        let here = candidates[w];
        if w + 1 == candidates.len() {
            breaks.push(here);
            break;
        }
        let start = *breaks.last().unwrap();
        let next = candidates[w + 1];
        let change = wrap_angle((pts[next] - pts[here]).angle() - (pts[here] - pts[start]).angle());
        if change.abs() >= merge_rad {
            breaks.push(here);
        }
    }

    let turn_rad = cfg.turn_deg.to_radians();
    let mut segments = Vec::new();
    let mut prev_heading = cfg.initial_heading;
    if breaks.len() == 1 {
        let heading = cfg.initial_heading.unwrap_or(0.0);
        segments.push(SketchSegment {
            length: 0.0,
            turn: Turn::Straight,
            cardinal: Cardinal::from_heading(heading),
            landmark: None,
            start: pts[0],
            end: pts[0],
        });
    }
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let heading = (pts[b] - pts[a]).angle();
        let turn = match prev_heading {
            Some(h) => classify(wrap_angle(heading - h), turn_rad),
            None => Turn::Straight,
        };
        prev_heading = Some(heading);
        segments.push(SketchSegment {
            length: arc[b] - arc[a],
            turn,
            cardinal: Cardinal::from_heading(heading),
            landmark: nearest_landmark(scene, pts[a], pts[b], cfg),
            start: pts[a],
            end: pts[b],
        });
    }
    let total_length = segments.iter().map(|s| s.length).sum();
    Ok(RouteSketch { segments, total_length })
}

fn nearest_landmark(scene: &Scene, a: Vec2, b: Vec2, cfg: &SketchConfig) -> Option<LandmarkRef> {
    let seg = Segment::new(a, b);
    let dir = b - a;
    scene
        .pois
        .iter()
        .filter(|p| cfg.exclude_name.as_deref() != Some(p.name.as_str()))
        .map(|p| (seg.distance_to(p.position), p))
        .filter(|(d, _)| *d <= cfg.corridor_radius)
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, p)| LandmarkRef {
            poi_id: p.id.clone(),
            name: p.name.clone(),
            side: if dir.cross(p.position - a) > 0.0 { Side::Left } else { Side::Right },
        })
}
