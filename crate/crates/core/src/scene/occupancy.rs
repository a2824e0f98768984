//! Voxel Monte-Carlo occupancy estimation projected to a 2D grid.
//!
//! Each grid cell owns a column of voxels spanning the configured z-band.
//! A voxel's soft occupancy is the fraction of sampled points that fall
//! inside any prism, averaged over several sampling rounds. The column
//! value is the maximum over its voxels, then the 2D map is refined by a
//! 3×3 median filter, a 3×3 morphological closing and removal of small
//! occupied components.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Prism, Scene};
use crate::geom::{Rect, Vec2};
use crate::seeding::rng_for;

const MAX_CELLS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccupancyConfig {
    /// Grid cell edge and horizontal voxel edge, meters.
    pub resolution: f64,
    /// Vertical voxel edge, meters.
    pub voxel_size: f64,
    pub samples_per_voxel: u32,
    pub rounds: u32,
    pub z_band: [f64; 2],
    pub threshold: f64,
    pub min_component_cells: usize,
    pub seed: u64,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        OccupancyConfig {
            resolution: 0.25,
            voxel_size: 0.25,
            samples_per_voxel: 64,
            rounds: 4,
            z_band: [0.1, 2.0],
            threshold: 0.5,
            min_component_cells: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum OccupancyError {
    #[error("z-band [{0}, {1}] is empty")]
    EmptyZBand(f64, f64),
    #[error("invalid occupancy config: {0}")]
    BadConfig(&'static str),
    #[error("grid of {0} cells exceeds the 1e8 cell limit")]
    TooManyCells(u64),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed occupancy file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub col: usize,
    pub row: usize,
}

impl GridCell {
    pub const fn new(col: usize, row: usize) -> Self {
        GridCell { col, row }
    }
}

/// Row-major raster; row 0 is the lowest y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub threshold: f64,
    pub soft: Vec<f64>,
    pub binary: Vec<bool>,
}

impl OccupancyGrid {
    /// Build a grid from soft values, deriving the binary layer by thresholding.
    pub fn from_soft(origin: Vec2, resolution: f64, width: usize, height: usize, soft: Vec<f64>, threshold: f64) -> Self {
        assert_eq!(soft.len(), width * height);
        let binary = soft.iter().map(|&s| s >= threshold).collect();
        OccupancyGrid { origin, resolution, width, height, threshold, soft, binary }
    }

    pub fn empty(bounds: Rect, resolution: f64) -> Self {
        let (w, h) = grid_dims(bounds, resolution);
        Self::from_soft(bounds.min, resolution, w, h, vec![0.0; w * h], 0.5)
    }

    pub fn index(&self, c: GridCell) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_at(&self, index: usize) -> GridCell {
        GridCell::new(index % self.width, index / self.width)
    }

    pub fn center(&self, c: GridCell) -> Vec2 {
        self.origin + Vec2::new((c.col as f64 + 0.5) * self.resolution, (c.row as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<GridCell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some(GridCell::new(fx as usize, fy as usize))
    }

    pub fn is_occupied(&self, c: GridCell) -> bool {
        self.binary[self.index(c)]
    }

    pub fn occupied_count(&self) -> usize {
        self.binary.iter().filter(|&&b| b).count()
    }
}

fn grid_dims(bounds: Rect, resolution: f64) -> (usize, usize) {
    let w = (bounds.width() / resolution - 1e-9).ceil().max(1.0) as usize;
    let h = (bounds.height() / resolution - 1e-9).ceil().max(1.0) as usize;
    (w, h)
}

fn layer_bounds(cfg: &OccupancyConfig) -> Vec<(f64, f64)> {
    let [z0, z1] = cfg.z_band;
    let n = ((z1 - z0) / cfg.voxel_size - 1e-9).ceil().max(1.0) as usize;
    (0..n)
        .map(|k| {
            let lo = z0 + k as f64 * cfg.voxel_size;
            (lo, (lo + cfg.voxel_size).min(z1))
        })
        .collect()
}

fn check_config(scene: &Scene, cfg: &OccupancyConfig) -> Result<(usize, usize), OccupancyError> {
    let [z0, z1] = cfg.z_band;
    if !(z1 > z0) {
        return Err(OccupancyError::EmptyZBand(z0, z1));
    }
    if !(cfg.resolution > 0.0) || !(cfg.voxel_size > 0.0) {
        return Err(OccupancyError::BadConfig("resolution and voxel_size must be positive"));
    }
    if cfg.samples_per_voxel == 0 || cfg.rounds == 0 {
        return Err(OccupancyError::BadConfig("samples_per_voxel and rounds must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(OccupancyError::BadConfig("threshold must lie in [0, 1]"));
    }
    let cells = (scene.bounds.width() / cfg.resolution).ceil() * (scene.bounds.height() / cfg.resolution).ceil();
    if !cells.is_finite() || cells > MAX_CELLS as f64 {
        return Err(OccupancyError::TooManyCells(if cells.is_finite() { cells as u64 } else { u64::MAX }));
    }
    Ok(grid_dims(scene.bounds, cfg.resolution))
}

struct VoxelBox {
    x: (f64, f64),
    y: (f64, f64),
    z: (f64, f64),
}

impl VoxelBox {
    fn fully_inside(&self, p: &Prism) -> bool {
        p.z_min() <= self.z.0
            && self.z.1 <= p.z_max()
            && [(self.x.0, self.y.0), (self.x.1, self.y.0), (self.x.1, self.y.1), (self.x.0, self.y.1)]
                .iter()
                .all(|&(x, y)| p.footprint.contains(Vec2::new(x, y)))
    }

    fn may_touch(&self, p: &Prism) -> bool {
        let r = p.footprint.bounding_rect();
        p.z_max() > self.z.0 && p.z_min() < self.z.1 && r.max.x >= self.x.0 && r.min.x <= self.x.1 && r.max.y >= self.y.0 && r.min.y <= self.y.1
    }
}

/// Monte-Carlo soft occupancy of one voxel.
///
/// Samples are jittered on a k×k horizontal lattice (k = ⌊√n⌋, leftovers
/// uniform) with Latin-hypercube heights, drawn from a stream keyed by
/// `(seed, voxel_index)`. Voxels touching no prism are exactly 0, voxels
/// wholly inside one are exactly 1; both agree with what sampling would
/// return, so the shortcut never changes a result.
fn estimate_voxel(prisms: &[&Prism], vb: &VoxelBox, cfg: &OccupancyConfig, voxel_index: u64) -> f64 {
    let near: Vec<&Prism> = prisms.iter().copied().filter(|p| vb.may_touch(p)).collect();
    if near.is_empty() {
        return 0.0;
    }
    if near.iter().any(|p| vb.fully_inside(p)) {
        return 1.0;
    }
    let n = cfg.samples_per_voxel as usize;
    let k = (n as f64).sqrt().floor() as usize;
    let mut rng = rng_for(cfg.seed, "occupancy", &[voxel_index]);
    let (dx, dy, dz) = (vb.x.1 - vb.x.0, vb.y.1 - vb.y.0, vb.z.1 - vb.z.0);
    let mut z_slots: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for _ in 0..cfg.rounds {
        z_slots.shuffle(&mut rng);
        let mut inside = 0usize;
        for (i, &slot) in z_slots.iter().enumerate() {
            let (u, v) = if i < k * k {
                let (a, b) = ((i % k) as f64, (i / k) as f64);
                ((a + rng.random::<f64>()) / k as f64, (b + rng.random::<f64>()) / k as f64)
            } else {
                (rng.random::<f64>(), rng.random::<f64>())
            };
            let w = (slot as f64 + rng.random::<f64>()) / n as f64;
            let (x, y, z) = (vb.x.0 + u * dx, vb.y.0 + v * dy, vb.z.0 + w * dz);
            if near.iter().any(|p| p.contains(x, y, z)) {
                inside += 1;
            }
        }
        total += inside as f64 / n as f64;
    }
    total / cfg.rounds as f64
}

/// Pre-filter voxel estimates, indexed `[cell_index * layers + layer]`.
pub fn sample_voxels(scene: &Scene, cfg: &OccupancyConfig) -> Result<(usize, usize, usize, Vec<f64>), OccupancyError> {
    let (w, h) = check_config(scene, cfg)?;
    let layers = layer_bounds(cfg);
    let nl = layers.len();
    let res = cfg.resolution;
    let origin = scene.bounds.min;
    let prisms: Vec<&Prism> = scene.obstacles.iter().collect();
    let values: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let prisms = &prisms;
            let layers = &layers;
            (0..w).flat_map(move |col| {
                let x0 = origin.x + col as f64 * res;
                let y0 = origin.y + row as f64 * res;
                let cell = (row * w + col) as u64;
                layers.iter().enumerate().map(move |(li, &(za, zb))| {
                    let vb = VoxelBox { x: (x0, x0 + res), y: (y0, y0 + res), z: (za, zb) };
                    estimate_voxel(prisms, &vb, cfg, cell * nl as u64 + li as u64)
                })
            })
        })
        .collect();
    Ok((w, h, nl, values))
}

/// Column maxima of the voxel estimates, before any filtering.
pub fn sample_prefilter(scene: &Scene, cfg: &OccupancyConfig) -> Result<OccupancyGrid, OccupancyError> {
    let (w, h, nl, voxels) = sample_voxels(scene, cfg)?;
    let soft: Vec<f64> = voxels.chunks(nl).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
    Ok(OccupancyGrid::from_soft(scene.bounds.min, cfg.resolution, w, h, soft, cfg.threshold))
}

pub fn generate_occupancy(scene: &Scene, cfg: &OccupancyConfig) -> Result<OccupancyGrid, OccupancyError> {
    let raw = sample_prefilter(scene, cfg)?;
    let (w, h) = (raw.width, raw.height);
    let med = median3(&raw.soft, w, h);
    let closed = erode3(&dilate3(&med, w, h), w, h);
    let soft = remove_small_components(closed, w, h, cfg.threshold, cfg.min_component_cells);
    Ok(OccupancyGrid::from_soft(raw.origin, raw.resolution, w, h, soft, cfg.threshold))
}

/// 3×3 neighbourhood with replicated borders.
fn neighbourhood(src: &[f64], w: usize, h: usize, col: usize, row: usize) -> [f64; 9] {
    let mut out = [0.0; 9];
    let mut k = 0;
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            let r = (row as i64 + dr).clamp(0, h as i64 - 1) as usize;
            let c = (col as i64 + dc).clamp(0, w as i64 - 1) as usize;
            out[k] = src[r * w + c];
            k += 1;
        }
    }
    out
}

fn map3(src: &[f64], w: usize, h: usize, f: impl Fn([f64; 9]) -> f64) -> Vec<f64> {
    (0..w * h).map(|i| f(neighbourhood(src, w, h, i % w, i / w))).collect()
}

fn median3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    map3(src, w, h, |mut n| {
        n.sort_by(f64::total_cmp);
        n[4]
    })
}

fn dilate3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    map3(src, w, h, |n| n.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn erode3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    map3(src, w, h, |n| n.into_iter().fold(f64::INFINITY, f64::min))
}

/// Zero out 8-connected occupied components with fewer than `min_cells` cells.
fn remove_small_components(mut soft: Vec<f64>, w: usize, h: usize, threshold: f64, min_cells: usize) -> Vec<f64> {
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || soft[start] < threshold {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (c, r) = ((i % w) as i64, (i / w) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if !seen[j] && soft[j] >= threshold {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if comp.len() < min_cells {
            for i in comp {
                soft[i] = 0.0;
            }
        }
    }
    soft
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    Heatmap,
    Binary,
}

/// Sidecar metadata written next to an exported PGM. Image row 0 is the
/// grid's highest row (north up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub mode: ExportMode,
    pub threshold: f64,
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OccupancyError + '_ {
    move |source| OccupancyError::Io { path: path.to_path_buf(), source }
}

/// Write an 8-bit P5 PGM plus `<name>.json` sidecar.
pub fn export_heatmap(grid: &OccupancyGrid, path: &Path, mode: ExportMode) -> Result<(), OccupancyError> {
    let mut bytes = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for row in (0..grid.height).rev() {
        for col in 0..grid.width {
            let i = row * grid.width + col;
            let px = match mode {
                ExportMode::Heatmap => (grid.soft[i].clamp(0.0, 1.0) * 255.0).round() as u8,
                ExportMode::Binary => {
                    if grid.binary[i] {
                        255
                    } else {
                        0
                    }
                }
            };
            bytes.push(px);
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))?;
    let meta = SidecarMeta {
        origin: grid.origin,
        resolution: grid.resolution,
        width: grid.width,
        height: grid.height,
        mode,
        threshold: grid.threshold,
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, text).map_err(io_err(&side))?;
    Ok(())
}

/// Read a grid written by [`export_heatmap`].
pub fn import_heatmap(path: &Path) -> Result<OccupancyGrid, OccupancyError> {
    let malformed = |message: String| OccupancyError::Malformed { path: path.to_path_buf(), message };
    let side = sidecar_path(path);
    let meta: SidecarMeta = serde_json::from_str(&fs::read_to_string(&side).map_err(io_err(&side))?)
        .map_err(|e| malformed(format!("sidecar: {e}")))?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    // Header: magic, width, height, maxval, each whitespace separated, then one whitespace byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(malformed("expected an 8-bit P5 image".into()));
    }
    let w: usize = fields[1].parse().map_err(|_| malformed("bad width".into()))?;
    let h: usize = fields[2].parse().map_err(|_| malformed("bad height".into()))?;
    if w != meta.width || h != meta.height {
        return Err(malformed("image size disagrees with sidecar".into()));
    }
    let pixels = bytes.get(pos..pos + w * h).ok_or_else(|| malformed("truncated pixel data".into()))?;
    let mut soft = vec![0.0; w * h];
    for (img_row, chunk) in pixels.chunks(w).enumerate() {
        let row = h - 1 - img_row;
        for (col, &px) in chunk.iter().enumerate() {
            soft[row * w + col] = px as f64 / 255.0;
        }
    }
    Ok(OccupancyGrid::from_soft(meta.origin, meta.resolution, w, h, soft, meta.threshold))
}
