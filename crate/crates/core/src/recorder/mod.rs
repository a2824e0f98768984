//! Episode archives on disk: a manifest, one JSON line per tick, the
//! occupancy heatmap and a copy of the scene.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crowd::{PersonProfile, Schedule};
use crate::geom::Vec2;
use crate::inquiry::InstructionResult;
use crate::metrics::{episode_metrics, EpisodeLog, EpisodeMetrics, MetricsError};
use crate::scene::{export_heatmap, ExportMode};
use crate::task::{Episode, EpisodeSink, EpisodeSpec, EpisodeStatus, Event, Frame, World};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.jsonl";
pub const OCCUPANCY_FILE: &str = "occupancy.pgm";
pub const SCENE_FILE: &str = "scene.json";

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid manifest: {message}")]
    BadManifest { path: PathBuf, message: String },
    #[error("{path}:{line}: corrupt frame: {message}")]
    CorruptLine { path: PathBuf, line: usize, message: String },
    #[error("archive has no frames")]
    NoFrames,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecorderError + '_ {
    move |source| RecorderError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub episode_id: String,
    pub spec: EpisodeSpec,
    pub profiles: Vec<PersonProfile>,
    pub schedules: Vec<Schedule>,
    pub instructions: Vec<InstructionResult>,
    pub status: EpisodeStatus,
    pub metrics: Option<EpisodeMetrics>,
    pub goal: Vec2,
    pub shortest_path_len: f64,
    pub frame_count: u32,
    /// False until the episode finished and every frame was written.
    pub complete: bool,
    /// A write failed; frames stop at the last good line.
    pub truncated: bool,
    pub scene_file: String,
    pub occupancy_file: String,
}

/// Writes one episode under `<runs_dir>/<episode_id>/`. Write failures
/// never stop the episode; they mark the archive truncated.
pub struct Recorder {
    runs_dir: PathBuf,
    dir: Option<PathBuf>,
    frames: Option<BufWriter<File>>,
    manifest: Option<Manifest>,
}

impl Recorder {
    pub fn new(runs_dir: impl Into<PathBuf>) -> Self {
        Recorder { runs_dir: runs_dir.into(), dir: None, frames: None, manifest: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn manifest(&self) -> Option<&Manifest> {
        self.manifest.as_ref()
    }

    fn fail(&mut self, what: &str, e: impl std::fmt::Display) {
        log::error!("recorder: {what}: {e}; archive marked truncated");
        self.frames = None;
        if let Some(m) = self.manifest.as_mut() {
            m.truncated = true;
        }
    }

    fn write_manifest(&mut self) {
        let (Some(dir), Some(m)) = (self.dir.as_ref(), self.manifest.as_ref()) else { return };
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let body = serde_json::to_vec_pretty(m).expect("manifest serializes");
        if let Err(e) = fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, &path)) {
            log::error!("recorder: cannot write {}: {e}", path.display());
        }
    }

    fn open(&mut self, world: &World, episode: &Episode) -> Result<(), RecorderError> {
        let dir = self.runs_dir.join(&episode.id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        self.dir = Some(dir.clone());
        let scene_path = dir.join(SCENE_FILE);
        let scene = serde_json::to_vec_pretty(world.scene.as_ref()).expect("scene serializes");
        fs::write(&scene_path, scene).map_err(io_err(&scene_path))?;
        let occ = dir.join(OCCUPANCY_FILE);
        export_heatmap(&world.occupancy, &occ, ExportMode::Heatmap)
            .map_err(|e| RecorderError::Io { path: occ.clone(), source: std::io::Error::other(e.to_string()) })?;
        let frames = dir.join(FRAMES_FILE);
        self.frames = Some(BufWriter::new(File::create(&frames).map_err(io_err(&frames))?));
        Ok(())
    }
}

impl EpisodeSink for Recorder {
    fn begin(&mut self, world: &World, episode: &Episode) {
        self.manifest = Some(Manifest {
            episode_id: episode.id.clone(),
            spec: episode.spec.clone(),
            profiles: episode.pedestrians.iter().map(|p| p.profile.clone()).collect(),
            schedules: episode.pedestrians.iter().map(|p| p.schedule.clone()).collect(),
            instructions: episode.instructions.clone(),
            status: episode.status,
            metrics: None,
            goal: episode.goal.position,
            shortest_path_len: episode.shortest_path_len,
            frame_count: 0,
            complete: false,
            truncated: false,
            scene_file: SCENE_FILE.into(),
            occupancy_file: OCCUPANCY_FILE.into(),
        });
        if let Err(e) = self.open(world, episode) {
            self.fail("cannot create archive", e);
        }
        self.write_manifest();
    }

    fn frame(&mut self, frame: &Frame) {
        let Some(w) = self.frames.as_mut() else { return };
        let mut line = serde_json::to_string(frame).expect("frame serializes");
        line.push('\n');
        match w.write_all(line.as_bytes()).and_then(|_| w.flush()) {
            Ok(()) => {
                if let Some(m) = self.manifest.as_mut() {
                    m.frame_count += 1;
                }
            }
            Err(e) => self.fail("frame write failed", e),
        }
    }

    fn end(&mut self, episode: &Episode, log: &EpisodeLog, metrics: &EpisodeMetrics) {
        if let Some(m) = self.manifest.as_mut() {
            m.instructions = log.instructions.clone();
            m.status = log.status;
            m.metrics = Some(*metrics);
            m.complete = !m.truncated && m.frame_count == episode.tick + 1;
        }
        self.frames = None;
        self.write_manifest();
    }
}

/// An archive read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub frames: Vec<Frame>,
    /// The last line was cut short and has been dropped.
    pub torn_tail: bool,
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, RecorderError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| RecorderError::BadManifest { path, message: e.to_string() })
}

/// Streams frames in file order. A final line without a newline is an
/// interrupted write and ends the stream quietly; any other unparsable
/// line is an error naming its line number.
pub struct FrameReader {
    path: PathBuf,
    reader: BufReader<File>,
    line: usize,
    pub torn_tail: bool,
    done: bool,
}

impl FrameReader {
    pub fn open(dir: &Path) -> Result<Self, RecorderError> {
        let path = dir.join(FRAMES_FILE);
        let file = File::open(&path).map_err(io_err(&path))?;
        Ok(FrameReader { path, reader: BufReader::new(file), line: 0, torn_tail: false, done: false })
    }
}

impl Iterator for FrameReader {
    type Item = Result<Frame, RecorderError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = String::new();
        self.line += 1;
        match self.reader.read_line(&mut buf) {
            Ok(0) => {
                self.done = true;
                None
            }
            Ok(_) => {
                let complete = buf.ends_with('\n');
                match serde_json::from_str::<Frame>(buf.trim_end()) {
                    Ok(f) => Some(Ok(f)),
                    Err(_) if !complete => {
                        self.torn_tail = true;
                        self.done = true;
                        None
                    }
                    Err(e) => {
                        self.done = true;
                        Some(Err(RecorderError::CorruptLine {
                            path: self.path.clone(),
                            line: self.line,
                            message: e.to_string(),
                        }))
                    }
                }
            }
            Err(e) => {
                self.done = true;
                Some(Err(RecorderError::Io { path: self.path.clone(), source: e }))
            }
        }
    }
}

pub fn load_archive(dir: &Path) -> Result<Archive, RecorderError> {
    let manifest = load_manifest(dir)?;
    let mut reader = FrameReader::open(dir)?;
    let frames = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok(Archive { dir: dir.to_path_buf(), manifest, frames, torn_tail: reader.torn_tail })
}

/// Frames whose tick lies in `ticks`, in order.
pub fn replay(dir: &Path, ticks: RangeInclusive<u32>) -> Result<impl Iterator<Item = Result<Frame, RecorderError>>, RecorderError> {
    let reader = FrameReader::open(dir)?;
    Ok(reader.filter(move |f| f.as_ref().map_or(true, |f| ticks.contains(&f.tick))))
}

impl Archive {
    /// Rebuild the metric inputs from recorded frames alone.
    pub fn reconstruct_log(&self) -> Result<EpisodeLog, RecorderError> {
        if self.frames.is_empty() {
            return Err(RecorderError::NoFrames);
        }
        let m = &self.manifest;
        let ndi_events = self
            .frames
            .iter()
            .flat_map(|f| f.events.iter())
            .filter_map(|e| match e {
                Event::Instruction { ask_tick: Some(t), .. } => Some(*t),
                _ => None,
            })
            .collect();
        Ok(EpisodeLog {
            episode_id: m.episode_id.clone(),
            spec: m.spec.clone(),
            trajectory: self.frames.iter().map(|f| f.agent.position()).collect(),
            goal: m.goal,
            shortest_path_len: m.shortest_path_len,
            ndi_events,
            status: m.status,
            instructions: m.instructions.clone(),
        })
    }

    pub fn recompute_metrics(&self) -> Result<EpisodeMetrics, RecorderError> {
        Ok(episode_metrics(&self.reconstruct_log()?, self.manifest.spec.delta_success_m)?)
    }
}

/// Every archive directory (one holding a manifest) directly under `runs_dir`, sorted.
pub fn list_archives(runs_dir: &Path) -> Result<Vec<PathBuf>, RecorderError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(runs_dir)
        .map_err(io_err(runs_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}
