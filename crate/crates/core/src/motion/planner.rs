//! 8-connected A* over an inflated binary occupancy grid.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::scene::{GridCell, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("start is blocked or off the map")]
    StartBlocked,
    #[error("goal is blocked or off the map")]
    GoalBlocked,
    #[error("no path between start and goal")]
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<GridCell>,
    pub waypoints: Vec<Vec2>,
    /// Meters; equals `(straight + √2·diagonal) · resolution`.
    pub cost: f64,
    pub straight_steps: u32,
    pub diagonal_steps: u32,
}

/// Step cost in cell units from integer step counts. Both the planner and
/// any reference search must use this so equal step mixes give equal bits.
pub fn step_cost(straight: u32, diagonal: u32) -> f64 {
    straight as f64 + diagonal as f64 * SQRT_2
}

/// Blocked-cell mask: occupied cells dilated by a disc of the inflation radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGrid {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub blocked: Vec<bool>,
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl NavGrid {
    pub fn new(grid: &OccupancyGrid, inflate_radius: f64) -> Self {
        Self::from_mask(grid.origin, grid.resolution, grid.width, grid.height, &grid.binary, inflate_radius)
    }

    pub fn from_mask(origin: Vec2, resolution: f64, width: usize, height: usize, occupied: &[bool], inflate_radius: f64) -> Self {
        assert_eq!(occupied.len(), width * height);
        let reach = (inflate_radius.max(0.0) / resolution).floor() as i64;
        let r2 = (inflate_radius / resolution).powi(2);
        let offsets: Vec<(i64, i64)> = (-reach..=reach)
            .flat_map(|dr| (-reach..=reach).map(move |dc| (dc, dr)))
            .filter(|&(dc, dr)| (dc * dc + dr * dr) as f64 <= r2 + 1e-9)
            .collect();
        let mut blocked = occupied.to_vec();
        for (i, _) in occupied.iter().enumerate().filter(|(_, &o)| o) {
            let (c, r) = ((i % width) as i64, (i / width) as i64);
            for &(dc, dr) in &offsets {
                let (nc, nr) = (c + dc, r + dr);
                if nc >= 0 && nr >= 0 && nc < width as i64 && nr < height as i64 {
                    blocked[nr as usize * width + nc as usize] = true;
                }
            }
        }
        NavGrid { origin, resolution, width, height, blocked }
    }

    pub fn index(&self, c: GridCell) -> usize {
        c.row * self.width + c.col
    }

    pub fn center(&self, c: GridCell) -> Vec2 {
        self.origin + Vec2::new((c.col as f64 + 0.5) * self.resolution, (c.row as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<GridCell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64) {
            return None;
        }
        Some(GridCell::new(fx as usize, fy as usize))
    }

    pub fn is_free(&self, c: GridCell) -> bool {
        c.col < self.width && c.row < self.height && !self.blocked[self.index(c)]
    }

    pub fn is_free_point(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    /// Free cell whose center is closest to `p` (ties by row-major index).
    pub fn nearest_free(&self, p: Vec2) -> Option<GridCell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor() as i64;
        let fy = ((p.y - self.origin.y) / self.resolution).floor() as i64;
        let c0 = fx.clamp(0, self.width as i64 - 1);
        let r0 = fy.clamp(0, self.height as i64 - 1);
        let max_ring = self.width.max(self.height) as i64;
        let mut best: Option<(f64, usize)> = None;
        for k in 0..=max_ring {
            if let Some((d, _)) = best {
                if (k as f64 - 1.0) * self.resolution > d {
                    break;
                }
            }
            for dr in -k..=k {
                for dc in -k..=k {
                    if dr.abs() != k && dc.abs() != k {
                        continue;
                    }
                    let (c, r) = (c0 + dc, r0 + dr);
                    if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
                        continue;
                    }
                    let cell = GridCell::new(c as usize, r as usize);
                    let idx = self.index(cell);
                    if self.blocked[idx] {
                        continue;
                    }
                    let d = self.center(cell).distance(p);
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d < bd || (d == bd && idx < bi),
                    };
                    if better {
                        best = Some((d, idx));
                    }
                }
            }
        }
        best.map(|(_, i)| GridCell::new(i % self.width, i / self.width))
    }

    pub fn plan(&self, start: Vec2, goal: Vec2) -> Result<GridPath, PlanError> {
        let s = self.cell_of(start).filter(|&c| self.is_free(c)).ok_or(PlanError::StartBlocked)?;
        let g = self.cell_of(goal).filter(|&c| self.is_free(c)).ok_or(PlanError::GoalBlocked)?;
        self.plan_cells(s, g)
    }

    /// Plan between the nearest free cells to `start` and `goal`.
    pub fn plan_snapped(&self, start: Vec2, goal: Vec2) -> Result<GridPath, PlanError> {
        let s = self.nearest_free(start).ok_or(PlanError::StartBlocked)?;
        let g = self.nearest_free(goal).ok_or(PlanError::GoalBlocked)?;
        self.plan_cells(s, g)
    }

    pub fn plan_cells(&self, start: GridCell, goal: GridCell) -> Result<GridPath, PlanError> {
        if !self.is_free(start) {
            return Err(PlanError::StartBlocked);
        }
        if !self.is_free(goal) {
            return Err(PlanError::GoalBlocked);
        }
        let n = self.width * self.height;
        let mut steps = vec![(u32::MAX, u32::MAX); n];
        let mut best = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let start_i = self.index(start);
        let goal_i = self.index(goal);
        let h = |i: usize| {
            let dc = (i % self.width) as f64 - goal.col as f64;
            let dr = (i / self.width) as f64 - goal.row as f64;
            dc.hypot(dr)
        };
        let mut open = BinaryHeap::new();
        steps[start_i] = (0, 0);
        best[start_i] = 0.0;
        open.push(Reverse((Key(h(start_i)), Key(0.0), start_i)));
        while let Some(Reverse((_, Key(g), i))) = open.pop() {
            if g > best[i] {
                continue;
            }
            if i == goal_i {
                break;
            }
            let (c, r) = ((i % self.width) as i64, (i / self.width) as i64);
            for &(dc, dr) in &MOVES {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= self.width as i64 || nr >= self.height as i64 {
                    continue;
                }
                let j = nr as usize * self.width + nc as usize;
                if self.blocked[j] {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal
                    && (self.blocked[r as usize * self.width + nc as usize] || self.blocked[nr as usize * self.width + c as usize])
                {
                    continue;
                }
                let (s0, d0) = steps[i];
                let next = if diagonal { (s0, d0 + 1) } else { (s0 + 1, d0) };
                let ng = step_cost(next.0, next.1);
                if ng < best[j] {
                    best[j] = ng;
                    steps[j] = next;
                    parent[j] = i;
                    open.push(Reverse((Key(ng + h(j)), Key(ng), j)));
                }
            }
        }
        if !best[goal_i].is_finite() {
            return Err(PlanError::NoPath);
        }
        let mut idxs = vec![goal_i];
        let mut cur = goal_i;
        while cur != start_i {
            cur = parent[cur];
            idxs.push(cur);
        }
        idxs.reverse();
        let cells: Vec<GridCell> = idxs.iter().map(|&i| GridCell::new(i % self.width, i / self.width)).collect();
        let waypoints = cells.iter().map(|&c| self.center(c)).collect();
        let (straight, diagonal) = steps[goal_i];
        Ok(GridPath {
            cells,
            waypoints,
            cost: step_cost(straight, diagonal) * self.resolution,
            straight_steps: straight,
            diagonal_steps: diagonal,
        })
    }
}

/// Plan on `grid` after inflating occupied cells by `inflate_radius`.
pub fn plan_path(grid: &OccupancyGrid, start: Vec2, goal: Vec2, inflate_radius: f64) -> Result<GridPath, PlanError> {
    NavGrid::new(grid, inflate_radius).plan(start, goal)
}
