use std::path::{Path, PathBuf};

use anyhow::Context;
use askworld::motion::SfmParams;
use askworld::scene::OccupancyConfig;
use serde::Deserialize;

/// Settings file; every field may be overridden by a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scene: Option<PathBuf>,
    pub seed: Option<u64>,
    pub port: Option<u16>,
    pub delta_success_m: Option<f64>,
    pub max_steps: Option<u32>,
    pub tick_duration_s: Option<f64>,
    pub pedestrian_count: Option<u32>,
    pub vehicle_count: Option<u32>,
    pub sfm: Option<SfmParams>,
    pub occupancy: Option<OccupancyConfig>,
    pub llm_endpoint: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
