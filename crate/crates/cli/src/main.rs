mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use askworld::inquiry::{HttpProvider, InstructionProvider, TemplateProvider, DEFAULT_TIMEOUT, LLM_ENDPOINT_ENV};
use askworld::metrics::{aggregate, episode_metrics, MetricsReport};
use askworld::protocol::{serve, ServerConfig};
use askworld::recorder::{list_archives, load_archive, replay, Recorder};
use askworld::scene::{export_heatmap, generate_occupancy, load_scene, ExportMode, OccupancyConfig};
use askworld::task::{run_scripted, sample_episode, AgentConfig, EpisodeConfig, Policy, TaskError, World};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use config::FileConfig;

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "askworld", version, about = "Direction-inquiry navigation simulator and benchmark")]
struct Cli {
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve lockstep episodes over WebSocket.
    Serve(ServeArgs),
    /// Run scripted episodes and write archives plus a report.
    Batch(BatchArgs),
    /// Generate an occupancy heatmap for a scene.
    Occupancy(OccupancyArgs),
    /// Score a directory of episode archives.
    Eval(EvalArgs),
    /// Print recorded frames as JSON lines.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct EpisodeArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Radius of success, meters.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    allow_nonstandard_delta: bool,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    tick_duration: Option<f64>,
    #[arg(long)]
    pedestrians: Option<u32>,
    #[arg(long)]
    vehicles: Option<u32>,
    /// Instruction provider endpoint (overrides the environment).
    #[arg(long)]
    llm_endpoint: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Write an archive per session under this directory.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Seconds to wait for each action before aborting the episode.
    #[arg(long, default_value_t = 60.0)]
    action_timeout: f64,
    /// Pace observations to one per tick of wall time.
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    #[arg(long, default_value = "oracle_ask")]
    agent: Policy,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OccupancyArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Export the thresholded map instead of soft values.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    logs: PathBuf,
    /// Radius of success; defaults to the one each episode ran with.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    allow_nonstandard_delta: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long, default_value_t = 0)]
    from: u32,
    #[arg(long)]
    to: Option<u32>,
}

/// Error that maps to the usage exit code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Serve(a) => cmd_serve(a, &file),
        Command::Batch(a) => cmd_batch(a, &file),
        Command::Occupancy(a) => cmd_occupancy(a, &file),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn episode_config(a: &EpisodeArgs, file: &FileConfig) -> anyhow::Result<EpisodeConfig> {
    let mut cfg = EpisodeConfig::default();
    if let Some(v) = a.delta.or(file.delta_success_m) {
        cfg.delta_success_m = v;
    }
    if let Some(v) = a.max_steps.or(file.max_steps) {
        cfg.max_steps = v;
    }
    if let Some(v) = a.tick_duration.or(file.tick_duration_s) {
        cfg.tick_duration = v;
    }
    if let Some(v) = a.pedestrians.or(file.pedestrian_count) {
        cfg.pedestrian_count = v;
    }
    if let Some(v) = a.vehicles.or(file.vehicle_count) {
        cfg.vehicle_count = v;
    }
    if let Some(s) = &file.sfm {
        cfg.sfm = s.clone();
    }
    cfg.validate(a.allow_nonstandard_delta).map_err(|e| match e {
        TaskError::NonstandardDelta(_) => usage(format!("{e}; pass --allow-nonstandard-delta to accept it")),
        other => usage(other.to_string()),
    })?;
    Ok(cfg)
}

fn scene_path(flag: &Option<PathBuf>, file: &FileConfig) -> anyhow::Result<PathBuf> {
    flag.clone().or_else(|| file.scene.clone()).ok_or_else(|| usage("a scene is required (--scene or config `scene`)"))
}

fn build_world(path: &Path, file: &FileConfig, cfg: &EpisodeConfig) -> anyhow::Result<World> {
    let scene = load_scene(path).with_context(|| format!("loading scene {}", path.display()))?;
    let occ = file.occupancy.clone().unwrap_or_default();
    World::new(scene, &occ, cfg.inflate_radius).context("generating occupancy")
}

fn provider(a: &EpisodeArgs, file: &FileConfig) -> Arc<dyn InstructionProvider> {
    let endpoint = a
        .llm_endpoint
        .clone()
        .or_else(|| file.llm_endpoint.clone())
        .or_else(|| std::env::var(LLM_ENDPOINT_ENV).ok().filter(|s| !s.is_empty()));
    match endpoint {
        Some(e) => {
            log::info!("using instruction provider at {e}");
            Arc::new(HttpProvider::new(e, DEFAULT_TIMEOUT))
        }
        None => Arc::new(TemplateProvider),
    }
}

fn cmd_serve(a: ServeArgs, file: &FileConfig) -> anyhow::Result<()> {
    let cfg = episode_config(&a.episode, file)?;
    if !(a.action_timeout > 0.0) {
        return Err(usage("--action-timeout must be positive"));
    }
    let path = scene_path(&a.episode.scene, file)?;
    let world = Arc::new(build_world(&path, file, &cfg)?);
    let server_cfg = ServerConfig {
        bind: a.bind,
        port: a.port.or(file.port).unwrap_or(8765),
        seed: a.episode.seed.or(file.seed).unwrap_or(0),
        action_timeout: Duration::from_secs_f64(a.action_timeout),
        pace: a.realtime.then(|| Duration::from_secs_f64(cfg.tick_duration)),
        runs_dir: a.runs,
        episode: cfg,
    };
    let server = serve(world, server_cfg, provider(&a.episode, file)).context("starting server")?;
    println!("listening on {}", server.url());
    let flag = server.shutdown_flag();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)).context("installing signal handler")?;
    server.join();
    println!("server stopped");
    Ok(())
}

fn write_report(out: &Path, report: &MetricsReport, label: &str) -> anyhow::Result<String> {
    let table = report.to_table(label);
    std::fs::write(out.join("report.txt"), &table).context("writing report.txt")?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(out.join("report.json"), json).context("writing report.json")?;
    Ok(table)
}

fn cmd_batch(a: BatchArgs, file: &FileConfig) -> anyhow::Result<()> {
    let cfg = episode_config(&a.episode, file)?;
    if a.episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let path = scene_path(&a.episode.scene, file)?;
    let world = build_world(&path, file, &cfg)?;
    let provider = provider(&a.episode, file);
    let base = a.episode.seed.or(file.seed).unwrap_or(0);
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let agent_cfg = AgentConfig::default();
    let mut results: Vec<(u64, anyhow::Result<_>)> = (0..a.episodes)
        .into_par_iter()
        .map(|i| {
            let seed = base + i;
            let run = || -> anyhow::Result<_> {
                let spec = sample_episode(&world, seed, &cfg)?;
                let mut rec = Recorder::new(&a.out);
                let log = run_scripted(&world, &spec, &cfg, a.agent, &agent_cfg, provider.as_ref(), Some(&mut rec))?;
                Ok(episode_metrics(&log, cfg.delta_success_m)?)
            };
            (i, run().with_context(|| format!("episode with seed {seed}")))
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let records = results.into_iter().map(|(_, r)| r).collect::<anyhow::Result<Vec<_>>>()?;
    let report = aggregate(&records)?;
    let label = serde_json::to_value(a.agent)?.as_str().unwrap_or("agent").to_string();
    print!("{}", write_report(&a.out, &report, &label)?);
    Ok(())
}

fn cmd_occupancy(a: OccupancyArgs, file: &FileConfig) -> anyhow::Result<()> {
    let path = scene_path(&a.scene, file)?;
    let scene = load_scene(&path).with_context(|| format!("loading scene {}", path.display()))?;
    let mut cfg: OccupancyConfig = file.occupancy.clone().unwrap_or_default();
    if let Some(v) = a.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = a.samples {
        cfg.samples_per_voxel = v;
    }
    if let Some(v) = a.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = a.seed.or(file.seed) {
        cfg.seed = v;
    }
    let grid = generate_occupancy(&scene, &cfg).context("generating occupancy")?;
    let mode = if a.binary { ExportMode::Binary } else { ExportMode::Heatmap };
    export_heatmap(&grid, &a.out, mode).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote {} ({}x{} cells, {} occupied)",
        a.out.display(),
        grid.width,
        grid.height,
        grid.occupied_count()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    if let Some(d) = a.delta {
        let (lo, hi) = askworld::task::STANDARD_DELTA_RANGE;
        if !(d > 0.0) || (!a.allow_nonstandard_delta && !(lo..=hi).contains(&d)) {
            return Err(usage(format!(
                "success radius {d} m lies outside the standard 1-3 m range; pass --allow-nonstandard-delta to accept it"
            )));
        }
    }
    let dirs = if a.logs.is_dir() {
        list_archives(&a.logs)?
    } else {
        bail!("{}: not a directory", a.logs.display());
    };
    if dirs.is_empty() {
        bail!("no logs found in {}", a.logs.display());
    }
    let mut records = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let archive = load_archive(d)?;
        if !archive.manifest.complete {
            log::warn!("{}: archive is incomplete; scoring the recorded prefix", d.display());
        }
        let delta = a.delta.unwrap_or(archive.manifest.spec.delta_success_m);
        records.push(episode_metrics(&archive.reconstruct_log()?, delta)?);
    }
    let report = aggregate(&records)?;
    print!("{}", report.to_table("logs"));
    if let Some(p) = a.json {
        std::fs::write(&p, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> anyhow::Result<()> {
    let to = a.to.unwrap_or(u32::MAX);
    if a.from > to {
        return Err(usage("--from must not exceed --to"));
    }
    let mut out = std::io::stdout().lock();
    for frame in replay(&a.archive, a.from..=to)? {
        let frame = frame?;
        use std::io::Write;
        writeln!(out, "{}", serde_json::to_string(&frame)?)?;
    }
    Ok(())
}
