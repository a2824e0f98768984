//! Episode scoring: trajectory length, success, SPL, navigation error,
//! oracle success and the number of direction inquiries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::inquiry::InstructionResult;
use crate::task::{EpisodeSpec, EpisodeStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("episode `{0}` has an empty trajectory")]
    EmptyTrajectory(String),
    #[error("episode `{0}` has a non-positive shortest path length")]
    BadShortestPath(String),
    #[error("no episode records to aggregate")]
    Empty,
    #[error("records computed with different success radii ({0} and {1})")]
    MixedDelta(f64, f64),
}

/// Everything needed to score one episode after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode_id: String,
    pub spec: EpisodeSpec,
    /// Agent positions p^0..p^T.
    pub trajectory: Vec<Vec2>,
    pub goal: Vec2,
    /// l*, meters.
    pub shortest_path_len: f64,
    /// Tick at which each successful ask was issued.
    pub ndi_events: Vec<u32>,
    pub status: EpisodeStatus,
    pub instructions: Vec<InstructionResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub tl: f64,
    pub s: u8,
    pub spl: f64,
    pub ne: f64,
    pub one: f64,
    pub osr_hit: u8,
    pub ndi: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct Aggregate {
    pub tl: f64,
    pub sr: f64,
    pub spl: f64,
    pub ne: f64,
    pub one: f64,
    pub osr: f64,
    pub ndi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_episode: Vec<EpisodeMetrics>,
    pub aggregate: Aggregate,
    pub delta: f64,
    pub n_episodes: usize,
}

pub fn episode_metrics(log: &EpisodeLog, delta: f64) -> Result<EpisodeMetrics, MetricsError> {
    let traj = &log.trajectory;
    let last = *traj.last().ok_or_else(|| MetricsError::EmptyTrajectory(log.episode_id.clone()))?;
    if !(log.shortest_path_len > 0.0) {
        return Err(MetricsError::BadShortestPath(log.episode_id.clone()));
    }
    let tl: f64 = traj.windows(2).map(|w| w[1].distance(w[0])).sum();
    let ne = last.distance(log.goal);
    let one = traj.iter().map(|p| p.distance(log.goal)).fold(f64::INFINITY, f64::min);
    let s = u8::from(ne <= delta);
    let l_star = log.shortest_path_len;
    let spl = f64::from(s) * l_star / tl.max(l_star);
    Ok(EpisodeMetrics { tl, s, spl, ne, one, osr_hit: u8::from(one <= delta), ndi: log.ndi_events.len() as u32, delta })
}

pub fn aggregate(records: &[EpisodeMetrics]) -> Result<MetricsReport, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    if let Some(r) = records.iter().find(|r| r.delta != first.delta) {
        return Err(MetricsError::MixedDelta(first.delta, r.delta));
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| records.iter().map(f).sum::<f64>() / n;
    let aggregate = Aggregate {
        tl: mean(&|r| r.tl),
        sr: mean(&|r| f64::from(r.s)),
        spl: mean(&|r| r.spl),
        ne: mean(&|r| r.ne),
        one: mean(&|r| r.one),
        osr: mean(&|r| f64::from(r.osr_hit)),
        ndi: mean(&|r| f64::from(r.ndi)),
    };
    Ok(MetricsReport { per_episode: records.to_vec(), aggregate, delta: first.delta, n_episodes: records.len() })
}

impl MetricsReport {
    /// Aligned plain-text table; rates are shown as percentages.
    pub fn to_table(&self, label: &str) -> String {
        let a = &self.aggregate;
        let w = label.len().max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w$}  {:>8} {:>7} {:>7} {:>8} {:>7} {:>8} {:>6}",
            "agent", "TL", "SR", "SPL", "NE", "OSR", "ONE", "NDI"
        );
        let _ = writeln!(
            out,
            "{:<w$}  {:>8.2} {:>7.1} {:>7.1} {:>8.2} {:>7.1} {:>8.2} {:>6.2}",
            label,
            a.tl,
            a.sr * 100.0,
            a.spl * 100.0,
            a.ne,
            a.osr * 100.0,
            a.one,
            a.ndi
        );
        let _ = writeln!(out, "episodes: {}  success radius: {} m", self.n_episodes, self.delta);
        out
    }
}
