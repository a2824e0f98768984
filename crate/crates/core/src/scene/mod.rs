//! Static scene description: bounds, prism obstacles, named points of
//! interest, the road graph, spawn regions and condition tags.

mod occupancy;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{ConvexPolygon, PolygonDefect, Rect, Segment, Vec2};
use crate::motion::RouteGraph;

pub use occupancy::{
    export_heatmap, generate_occupancy, import_heatmap, ExportMode, GridCell, OccupancyConfig, OccupancyError,
    OccupancyGrid, SidecarMeta, sample_prefilter, sample_voxels, sidecar_path,
};

/// Extruded convex polygon, the only static obstacle primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prism {
    pub footprint: ConvexPolygon,
    /// `[z_min, z_max]` in meters.
    #[serde(rename = "z")]
    pub z_range: [f64; 2],
}

impl Prism {
    pub fn z_min(&self) -> f64 {
        self.z_range[0]
    }

    pub fn z_max(&self) -> f64 {
        self.z_range[1]
    }

    /// Footprint containment with boundary inclusive, z half-open `[z_min, z_max)`.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        z >= self.z_min() && z < self.z_max() && self.footprint.contains(Vec2::new(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiCategory {
    Store,
    Supermarket,
    Restaurant,
    Cafe,
    Bank,
    Hospital,
    Pharmacy,
    School,
    Park,
    BusStop,
    Parking,
    Hotel,
    Office,
    Library,
    GasStation,
    Museum,
}

impl PoiCategory {
    pub const ALL: [PoiCategory; 16] = [
        PoiCategory::Store,
        PoiCategory::Supermarket,
        PoiCategory::Restaurant,
        PoiCategory::Cafe,
        PoiCategory::Bank,
        PoiCategory::Hospital,
        PoiCategory::Pharmacy,
        PoiCategory::School,
        PoiCategory::Park,
        PoiCategory::BusStop,
        PoiCategory::Parking,
        PoiCategory::Hotel,
        PoiCategory::Office,
        PoiCategory::Library,
        PoiCategory::GasStation,
        PoiCategory::Museum,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub name: String,
    pub category: PoiCategory,
    #[serde(rename = "pos")]
    pub position: Vec2,
    pub approach_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Rain,
    Fog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionTags {
    /// Hours in `[0, 24)`.
    pub time_of_day: f64,
    pub weather: Weather,
    pub visibility_m: f64,
}

impl Default for ConditionTags {
    fn default() -> Self {
        ConditionTags { time_of_day: 12.0, weather: Weather::Clear, visibility_m: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Prism>,
    pub pois: Vec<Poi>,
    #[serde(default)]
    pub road_graph: RouteGraph,
    #[serde(default)]
    pub spawn_regions: Vec<Rect>,
    #[serde(default)]
    pub condition: ConditionTags,
    /// POI ids eligible as episode goals; every POI when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goal_candidates: Vec<String>,
}

/// A violated scene invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("bounds must be a finite rectangle with positive extent")]
    InvalidBounds,
    #[error("obstacle {index}: footprint {defect}")]
    BadFootprint { index: usize, defect: FootprintDefect },
    #[error("obstacle {index}: z_max must exceed z_min")]
    EmptyZRange { index: usize },
    #[error("obstacle {index}: footprint leaves scene bounds")]
    ObstacleOutOfBounds { index: usize },
    #[error("poi `{id}` lies outside scene bounds")]
    PoiOutOfBounds { id: String },
    #[error("poi id `{id}` is not unique")]
    DuplicatePoiId { id: String },
    #[error("poi `{id}`: approach_radius must be positive")]
    NonPositiveApproachRadius { id: String },
    #[error("spawn region {index} is not a valid rectangle inside bounds")]
    BadSpawnRegion { index: usize },
    #[error("spawn region {region} intersects obstacle {obstacle}")]
    SpawnRegionIntersectsObstacle { region: usize, obstacle: usize },
    #[error("condition: visibility_m must be positive")]
    NonPositiveVisibility,
    #[error("condition: time_of_day must lie in [0, 24)")]
    TimeOfDayOutOfRange,
    #[error("road graph: {0}")]
    RoadGraph(String),
    #[error("goal candidate `{id}` is not a poi id")]
    UnknownGoalCandidate { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FootprintDefect(pub PolygonDefect);

impl fmt::Display for FootprintDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.0 {
            PolygonDefect::TooFewVertices => "needs at least 3 vertices",
            PolygonDefect::NonFinite => "has non-finite coordinates",
            PolygonDefect::NotCounterClockwise => "must be counter-clockwise with positive area",
            PolygonDefect::NotConvex => "must be convex and simple",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scene: {0}")]
    Invalid(#[from] ValidationError),
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    Scene::from_json(&text)
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !self.bounds.is_valid() {
            return Err(ValidationError::InvalidBounds);
        }
        for (index, ob) in self.obstacles.iter().enumerate() {
            ob.footprint
                .check()
                .map_err(|d| ValidationError::BadFootprint { index, defect: FootprintDefect(d) })?;
            if !(ob.z_max() > ob.z_min()) {
                return Err(ValidationError::EmptyZRange { index });
            }
            if !ob.footprint.vertices().iter().all(|&v| self.bounds.contains(v)) {
                return Err(ValidationError::ObstacleOutOfBounds { index });
            }
        }
        let mut ids = HashSet::new();
        for poi in &self.pois {
            if !ids.insert(poi.id.as_str()) {
                return Err(ValidationError::DuplicatePoiId { id: poi.id.clone() });
            }
            if !self.bounds.contains(poi.position) {
                return Err(ValidationError::PoiOutOfBounds { id: poi.id.clone() });
            }
            if !(poi.approach_radius > 0.0) {
                return Err(ValidationError::NonPositiveApproachRadius { id: poi.id.clone() });
            }
        }
        for (region, r) in self.spawn_regions.iter().enumerate() {
            if !r.is_valid() || !self.bounds.contains(r.min) || !self.bounds.contains(r.max) {
                return Err(ValidationError::BadSpawnRegion { index: region });
            }
            let rp = ConvexPolygon::from_rect(*r);
            if let Some(obstacle) = self.obstacles.iter().position(|o| o.footprint.intersects(&rp)) {
                return Err(ValidationError::SpawnRegionIntersectsObstacle { region, obstacle });
            }
        }
        let c = &self.condition;
        if !(c.visibility_m > 0.0) {
            return Err(ValidationError::NonPositiveVisibility);
        }
        if !(0.0..24.0).contains(&c.time_of_day) {
            return Err(ValidationError::TimeOfDayOutOfRange);
        }
        self.road_graph.validate().map_err(ValidationError::RoadGraph)?;
        for id in &self.goal_candidates {
            if !ids.contains(id.as_str()) {
                return Err(ValidationError::UnknownGoalCandidate { id: id.clone() });
            }
        }
        Ok(())
    }

    pub fn poi(&self, id: &str) -> Option<&Poi> {
        self.pois.iter().find(|p| p.id == id)
    }

    /// Goal-eligible POIs in scene order.
    pub fn goal_pois(&self) -> Vec<&Poi> {
        if self.goal_candidates.is_empty() {
            self.pois.iter().collect()
        } else {
            self.pois.iter().filter(|p| self.goal_candidates.contains(&p.id)).collect()
        }
    }

    pub fn point_in_obstacle(&self, x: f64, y: f64, z: f64) -> bool {
        self.obstacles.iter().any(|o| o.contains(x, y, z))
    }

    /// Obstacle outlines (for prisms reaching into `[z_lo, z_hi]`) plus the bounds,
    /// as wall segments for local avoidance and ray casting.
    pub fn walls(&self, z_lo: f64, z_hi: f64) -> Vec<Segment> {
        let mut walls: Vec<Segment> = self.bounds.edges().to_vec();
        for ob in &self.obstacles {
            if ob.z_max() > z_lo && ob.z_min() < z_hi {
                walls.extend(ob.footprint.edges());
            }
        }
        walls
    }

    /// Lowest and highest z over all obstacles, if any.
    pub fn z_extent(&self) -> Option<(f64, f64)> {
        self.obstacles.iter().fold(None, |acc, o| match acc {
            None => Some((o.z_min(), o.z_max())),
            Some((lo, hi)) => Some((lo.min(o.z_min()), hi.max(o.z_max()))),
        })
    }
}

/// Walking-height band used for wall extraction.
pub const BODY_Z_BAND: (f64, f64) = (0.1, 2.0);
