use std::sync::Arc;

use crate::geom::Segment;
use crate::motion::NavGrid;
use crate::scene::{generate_occupancy, OccupancyConfig, OccupancyError, OccupancyGrid, Scene, BODY_Z_BAND};

/// Static, shareable part of every episode on one scene.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Arc<Scene>,
    pub occupancy: OccupancyGrid,
    pub nav: NavGrid,
    pub walls: Vec<Segment>,
}

impl World {
    pub fn new(scene: Scene, occupancy: &OccupancyConfig, inflate_radius: f64) -> Result<Self, OccupancyError> {
        let grid = generate_occupancy(&scene, occupancy)?;
        Ok(Self::from_grid(scene, grid, inflate_radius))
    }

    pub fn from_grid(scene: Scene, occupancy: OccupancyGrid, inflate_radius: f64) -> Self {
        let nav = NavGrid::new(&occupancy, inflate_radius);
        let walls = scene.walls(BODY_Z_BAND.0, BODY_Z_BAND.1);
        World { scene: Arc::new(scene), occupancy, nav, walls }
    }
}
