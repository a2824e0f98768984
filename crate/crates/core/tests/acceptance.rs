//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use askworld::geom::{ConvexPolygon, Rect, Vec2};
use askworld::inquiry::{
    render_template, rounded_distance, Cardinal, DirectionType, DistanceDescription, GoalRef, InstructionProvider,
    InstructionRequest, LandmarkRef, LandmarkUse, NavStyle, Perspective, RouteSketch, Side, SketchSegment,
    TemplateProvider, Turn, UtteranceLength,
};
use askworld::metrics::{aggregate, episode_metrics, EpisodeLog};
use askworld::motion::{step_bodies, BodyState, NavGrid, PlanError, SfmParams, Steering};
use askworld::protocol::{client_session, codes, serve, FnAgent, ServerConfig, WireMessage};
use askworld::recorder::Recorder;
use askworld::scene::{generate_occupancy, sample_prefilter, ConditionTags, OccupancyConfig, Prism, Scene};
use askworld::seeding::rng_for;
use askworld::task::{
    run_episode, run_scripted, sample_episode, AgentAction, AgentConfig, EpisodeConfig, EpisodeStatus, Policy,
};
use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn metrics_oracle() -> Outcome {
    let mut rng = rng_for(1, "acceptance-metrics", &[]);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut records = Vec::new();
    let mut refs = Vec::new();
    for i in 0..50 {
        let log = random_log(&mut rng, i);
        let delta = rng.random_range(1.0..=3.0);
        let m = episode_metrics(&log, delta).map_err(|e| e.to_string())?;
        let traj: Vec<(f64, f64)> = log.trajectory.iter().map(|p| (p.x, p.y)).collect();
        let r = reference_metrics(&traj, (log.goal.x, log.goal.y), log.shortest_path_len, log.ndi_events.len(), delta);
        let pairs = [
            (m.tl, r.tl),
            (f64::from(m.s), r.s),
            (m.spl, r.spl),
            (m.ne, r.ne),
            (m.one, r.one),
            (f64::from(m.osr_hit), r.osr),
            (f64::from(m.ndi), r.ndi),
        ];
        check(pairs.iter().all(|&(a, b)| close(a, b)), || format!("log {i}: {m:?} vs {r:?}"))?;
        records.push(episode_metrics(&log, 3.0).unwrap());
        let traj: Vec<(f64, f64)> = log.trajectory.iter().map(|p| (p.x, p.y)).collect();
        refs.push(reference_metrics(&traj, (log.goal.x, log.goal.y), log.shortest_path_len, log.ndi_events.len(), 3.0));
    }
    let agg = aggregate(&records).map_err(|e| e.to_string())?.aggregate;
    let mean = |f: fn(&RefMetrics) -> f64| refs.iter().map(f).sum::<f64>() / refs.len() as f64;
    check(
        close(agg.tl, mean(|r| r.tl))
            && close(agg.sr, mean(|r| r.s))
            && close(agg.spl, mean(|r| r.spl))
            && close(agg.ne, mean(|r| r.ne))
            && close(agg.one, mean(|r| r.one))
            && close(agg.osr, mean(|r| r.osr))
            && close(agg.ndi, mean(|r| r.ndi)),
        || format!("aggregate mismatch {agg:?}"),
    )?;

    let mut batch = Vec::new();
    let mut successes = 0;
    for i in 0..10_000u64 {
        let log = random_log(&mut rng, i);
        let delta = rng.random_range(1.0..=3.0);
        let m = episode_metrics(&log, delta).unwrap();
        successes += m.s as u32;
        check(m.spl <= f64::from(m.s) && m.s <= m.osr_hit, || format!("case {i}: SPL<=SR<=OSR broken {m:?}"))?;
        check(m.one <= m.ne, || format!("case {i}: ONE > NE {m:?}"))?;
        check(m.s == 1 || m.spl == 0.0, || format!("case {i}: spl without success {m:?}"))?;
        check((0.0..=1.0).contains(&m.spl), || format!("case {i}: spl out of range {m:?}"))?;
        let k = rng.random_range(0.1..10.0);
        let scaled = EpisodeLog {
            trajectory: log.trajectory.iter().map(|p| *p * k).collect(),
            goal: log.goal * k,
            shortest_path_len: log.shortest_path_len * k,
            ..log.clone()
        };
        let ms = episode_metrics(&scaled, delta * k).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        check(
            rel(ms.tl, m.tl * k) && rel(ms.ne, m.ne * k) && rel(ms.one, m.one * k) && ms.ndi == m.ndi,
            || format!("case {i}: lengths not scale-equivariant"),
        )?;
        let boundary = (m.ne - delta).abs() < 1e-9 || (m.one - delta).abs() < 1e-9;
        if !boundary {
            check(ms.s == m.s && ms.osr_hit == m.osr_hit && rel(ms.spl, m.spl), || {
                format!("case {i}: rates not scale-invariant")
            })?;
        }
        batch.push(episode_metrics(&log, 3.0).unwrap());
        if batch.len() == 100 {
            let a = aggregate(&batch).unwrap().aggregate;
            check(a.spl <= a.sr + 1e-12 && a.sr <= a.osr + 1e-12 && a.one <= a.ne + 1e-12, || {
                format!("aggregate ordering broken {a:?}")
            })?;
            batch.clear();
        }
    }
    Ok(format!("50 logs match the reference; 10000 fuzz cases hold ({successes} successes)"))
}

// ---------------------------------------------------------------- 2

fn ask_improves_success() -> Outcome {
    let world = world("duplicate_stores");
    let cfg = EpisodeConfig::default();
    let sr = |policy: Policy| -> Result<(f64, f64), String> {
        let rows: Vec<(u8, u32)> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let spec = sample_episode(&world, seed, &cfg).map_err(|e| e.to_string())?;
                let log = run_scripted(&world, &spec, &cfg, policy, &AgentConfig::default(), &TemplateProvider, None)
                    .map_err(|e| e.to_string())?;
                let m = episode_metrics(&log, cfg.delta_success_m).map_err(|e| e.to_string())?;
                Ok((m.s, m.ndi))
            })
            .collect::<Result<_, String>>()?;
        let n = rows.len() as f64;
        Ok((
            rows.iter().map(|r| f64::from(r.0)).sum::<f64>() / n,
            rows.iter().map(|r| f64::from(r.1)).sum::<f64>() / n,
        ))
    };
    let (no_ask, _) = sr(Policy::OracleNoAsk)?;
    let (ask, ndi) = sr(Policy::OracleAsk)?;
    let detail = format!("SR no-ask {no_ask:.3}, SR ask {ask:.3}, gap {:.3}, mean NDI {ndi:.2}", ask - no_ask);
    check(ask - no_ask >= 0.20, || format!("gap below 0.20: {detail}"))?;
    check((no_ask - 0.5).abs() <= 0.10, || format!("no-ask SR outside 0.5 +/- 0.10: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 3

fn astar_optimality() -> Outcome {
    const N: usize = 64;
    let mut solved = 0;
    let mut unsolved = 0;
    for g in 0..100u64 {
        let mut rng = rng_for(g, "acceptance-astar", &[]);
        let mut mask = vec![false; N * N];
        let mut order: Vec<usize> = (0..N * N).collect();
        order.shuffle(&mut rng);
        for &i in &order[..(N * N * 3) / 10] {
            mask[i] = true;
        }
        let nav = NavGrid::from_mask(Vec2::ZERO, 1.0, N, N, &mask, 0.0);
        check(nav.blocked == mask, || format!("grid {g}: zero inflation changed the mask"))?;
        let free: Vec<usize> = (0..N * N).filter(|&i| !mask[i]).collect();
        for q in 0..5 {
            let s = free[rng.random_range(0..free.len())];
            let t = free[rng.random_range(0..free.len())];
            let (sc, tc) = ((s % N, s / N), (t % N, t / N));
            let oracle = dijkstra_steps(&mask, N, N, sc, tc);
            let got = nav.plan_cells(
                askworld::scene::GridCell::new(sc.0, sc.1),
                askworld::scene::GridCell::new(tc.0, tc.1),
            );
            match (oracle, got) {
                (Some(steps), Ok(path)) => {
                    check((path.straight_steps, path.diagonal_steps) == steps, || {
                        format!("grid {g} query {q}: A* steps {:?} vs Dijkstra {steps:?}", (path.straight_steps, path.diagonal_steps))
                    })?;
                    let expect = askworld::motion::step_cost(steps.0, steps.1);
                    check(path.cost == expect, || format!("grid {g} query {q}: cost {} vs {expect}", path.cost))?;
                    solved += 1;
                }
                (None, Err(PlanError::NoPath)) => unsolved += 1,
                (o, r) => return Err(format!("grid {g} query {q}: Dijkstra {o:?} vs A* {:?}", r.map(|p| p.cost))),
            }
        }
    }
    check(unsolved > 0 && solved > 0, || format!("degenerate sample: {solved} solved, {unsolved} unsolved"))?;
    Ok(format!("500 queries on 100 grids: {solved} equal costs, {unsolved} NoPath agreed"))
}

// ---------------------------------------------------------------- 4

fn sfm_sanity() -> Outcome {
    let p = SfmParams::default();
    let dt = p.dt;

    let mut body = vec![BodyState::at_rest(0, Vec2::ZERO, 0.0)];
    let v0 = body[0].v_desired;
    let goal = Vec2::new(20.0, 0.0);
    let mut steer = vec![Steering::Waypoints(VecDeque::from([goal]))];
    let mut t = 0.0;
    let mut worst_cruise = 0.0f64;
    let mut worst_curve = 0.0f64;
    while t < 60.0 && body[0].position.distance(goal) > 0.3 {
        step_bodies(&mut body, &mut steer, &[], &p, dt).map_err(|e| e.to_string())?;
        t += dt;
        let v = body[0].speed();
        if t <= 3.0 * p.tau + 1e-9 {
            let analytic = v0 * (1.0 - (-t / p.tau).exp());
            worst_curve = worst_curve.max((v - analytic).abs() / v0);
        } else if body[0].position.distance(goal) > 2.0 {
            worst_cruise = worst_cruise.max((v - v0).abs() / v0);
        }
    }
    let reached = body[0].position.distance(goal);
    check(reached <= 0.3, || format!("lone agent stopped {reached:.2} m from the goal"))?;
    check(worst_cruise <= 0.05, || format!("speed after 3 tau deviates {:.1}%", worst_cruise * 100.0))?;
    check(worst_curve <= 0.05, || format!("speed-up deviates {:.1}% from relaxation", worst_curve * 100.0))?;
    let lone_t = t;

    let ga = Vec2::new(20.0, 0.1);
    let gb = Vec2::new(0.0, -0.1);
    let mut bodies = vec![BodyState::at_rest(0, Vec2::new(0.0, -0.1), 0.0), BodyState::at_rest(1, Vec2::new(20.0, 0.1), std::f64::consts::PI)];
    let mut steer = vec![Steering::Waypoints(VecDeque::from([ga])), Steering::Waypoints(VecDeque::from([gb]))];
    let mut t = 0.0;
    let mut worst_overlap = 0.0f64;
    while t < 60.0 {
        step_bodies(&mut bodies, &mut steer, &[], &p, dt).map_err(|e| e.to_string())?;
        t += dt;
        let gap = bodies[0].position.distance(bodies[1].position) - bodies[0].radius - bodies[1].radius;
        worst_overlap = worst_overlap.max(-gap);
        if bodies[0].position.distance(ga) <= 0.3 && bodies[1].position.distance(gb) <= 0.3 {
            break;
        }
    }
    check(worst_overlap <= 0.05, || format!("head-on pair overlapped by {worst_overlap:.3} m"))?;
    check(bodies[0].position.distance(ga) <= 0.3 && bodies[1].position.distance(gb) <= 0.3, || {
        "head-on pair did not both arrive within 60 s".into()
    })?;
    Ok(format!(
        "lone arrival {lone_t:.1} s, cruise dev {:.2}%, curve dev {:.2}%; pair arrival {t:.1} s, max overlap {:.3} m",
        worst_cruise * 100.0,
        worst_curve * 100.0,
        worst_overlap.max(0.0)
    ))
}

// ---------------------------------------------------------------- 5

fn bare_scene(bounds: Rect, obstacles: Vec<Prism>) -> Scene {
    Scene {
        id: "fixture".into(),
        bounds,
        obstacles,
        pois: vec![],
        road_graph: Default::default(),
        spawn_regions: vec![],
        condition: ConditionTags::default(),
        goal_candidates: vec![],
    }
}

fn occupancy_accuracy() -> Outcome {
    let cfg = OccupancyConfig::default();
    let res = cfg.resolution;
    let mut summary = Vec::new();
    for f in [0.25, 0.5, 0.75] {
        let good: usize = (0..100u64)
            .into_par_iter()
            .map(|trial| {
                let mut rng = rng_for(trial, "acceptance-occupancy", &[(f * 100.0) as u64]);
                let col = rng.random_range(2..8) as f64;
                let row = rng.random_range(2..8) as f64;
                let (x0, y0) = (col * res, row * res);
                let rect = if rng.random_bool(0.5) {
                    Rect::new(Vec2::new(x0, y0), Vec2::new(x0 + f * res, y0 + res))
                } else {
                    Rect::new(Vec2::new(x0, y0 + (1.0 - f) * res), Vec2::new(x0 + res, y0 + res))
                };
                let prism = Prism { footprint: ConvexPolygon::from_rect(rect), z_range: [0.0, 3.0] };
                let scene = bare_scene(Rect::new(Vec2::ZERO, Vec2::new(2.5, 2.5)), vec![prism]);
                let grid = sample_prefilter(&scene, &OccupancyConfig { seed: trial, ..cfg.clone() }).unwrap();
                let c = grid.cell_of(Vec2::new(x0 + res / 2.0, y0 + res / 2.0)).unwrap();
                usize::from((grid.soft[grid.index(c)] - f).abs() <= 0.05)
            })
            .sum();
        summary.push(format!("f={f}: {good}/100"));
        check(good >= 99, || format!("soft estimate within 0.05 in only {good}/100 trials at f={f}"))?;
    }

    let scene = scene("three_buildings");
    let grid = generate_occupancy(&scene, &cfg).map_err(|e| e.to_string())?;
    let solid: Vec<&Prism> =
        scene.obstacles.iter().filter(|o| o.z_max() > cfg.z_band[0] && o.z_min() < cfg.z_band[1]).collect();
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..grid.width * grid.height {
        let centre = grid.center(grid.cell_at(i));
        let truth = solid.iter().any(|o| inside_half_planes(o.footprint.vertices(), centre));
        let got = grid.binary[i];
        inter += usize::from(truth && got);
        union += usize::from(truth || got);
    }
    let iou = inter as f64 / union as f64;
    check(iou >= 0.95, || format!("IoU {iou:.4} below 0.95"))?;
    Ok(format!("{}; three-building IoU {iou:.4}", summary.join(", ")))
}

// ---------------------------------------------------------------- 6

fn action_stream(seed: u64) -> Vec<AgentAction> {
    let mut rng = rng_for(seed, "acceptance-actions", &[]);
    (0..=100)
        .map(|_| match rng.random_range(0..10) {
            0..=5 => AgentAction::Forward,
            6 => AgentAction::TurnLeft,
            7 => AgentAction::TurnRight,
            _ => AgentAction::Ask,
        })
        .collect()
}

fn archive_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let world = world("town_square");
    let cfg = EpisodeConfig::default();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for seed in [3u64, 11, 42] {
        let actions = action_stream(seed);
        let spec = sample_episode(&world, seed, &cfg).map_err(|e| e.to_string())?;
        let mut runs = Vec::new();
        for run in 0..3 {
            let dir = tmp.path().join(format!("local-{seed}-{run}"));
            let mut rec = Recorder::new(&dir);
            let mut agent = FnAgent(|o: &askworld::protocol::Observation| actions[o.tick as usize]);
            let log = run_episode(&world, &spec, &cfg, &mut agent, &TemplateProvider, Some(&mut rec))
                .map_err(|e| e.to_string())?;
            runs.push((serde_json::to_vec(&log).unwrap(), archive_bytes(&dir.join(spec.episode_id()))));
        }
        check(runs.windows(2).all(|w| w[0] == w[1]), || format!("seed {seed}: in-process runs differ"))?;

        let runs_dir = tmp.path().join(format!("net-{seed}"));
        let server = serve(
            Arc::clone(&world),
            ServerConfig { port: 0, seed, runs_dir: Some(runs_dir.clone()), ..ServerConfig::default() },
            Arc::new(TemplateProvider),
        )
        .map_err(|e| e.to_string())?;
        let mut agent = FnAgent(|o: &askworld::protocol::Observation| actions[o.tick as usize]);
        let out = client_session(&server.url(), &mut agent).map_err(|e| e.to_string())?;
        server.shutdown();
        let net_log = out.log.ok_or("networked session ended early")?;
        check(serde_json::to_vec(&net_log).unwrap() == runs[0].0, || format!("seed {seed}: networked log differs"))?;
        let end_log = out.end.map(|e| serde_json::to_vec(&e.log).unwrap());
        check(end_log.as_ref() == Some(&runs[0].0), || format!("seed {seed}: episode_end log differs"))?;
        check(archive_bytes(&runs_dir.join(spec.episode_id())) == runs[0].1, || {
            format!("seed {seed}: networked archive differs from in-process archive")
        })?;
        checked += 1;
    }
    Ok(format!("{checked} seeds: 3 in-process runs and 1 networked run byte-identical"))
}

// ---------------------------------------------------------------- 7

fn protocol_conformance() -> Outcome {
    let world = world("town_square");
    let server = serve(Arc::clone(&world), ServerConfig { port: 0, seed: 5, ..ServerConfig::default() }, Arc::new(TemplateProvider))
        .map_err(|e| e.to_string())?;
    let url = server.url();

    let mut ws = raw_connect(&url);
    let hello = match recv(&mut ws) {
        Some(WireMessage::Hello(h)) => h,
        other => return Err(format!("expected hello, got {other:?}")),
    };
    let id = hello.episode_id.clone();
    let first = match recv(&mut ws) {
        Some(WireMessage::Observation(o)) => o,
        other => return Err(format!("expected observation, got {other:?}")),
    };
    check(first.tick == 0 && first.instruction.is_some(), || "first observation lacks the initial instruction".into())?;
    let probes: Vec<(String, &str)> = vec![
        (action_json(&id, 7, "forward"), codes::TICK_MISMATCH),
        ("{not json".into(), codes::MALFORMED),
        (r#"{"type":"action","tick":0}"#.into(), codes::MALFORMED),
        (r#"{"type":"action","protocol_version":1,"episode_id":"x","tick":0,"cmd":"fly"}"#.into(), codes::MALFORMED),
        (action_json(&id, 0, "forward").replace("\"protocol_version\":1", "\"protocol_version\":9"), codes::BAD_VERSION),
        (action_json("ep-999", 0, "forward"), codes::EPISODE_MISMATCH),
        (serde_json::to_string(&WireMessage::Hello(hello.clone())).unwrap(), codes::UNEXPECTED),
    ];
    for (text, code) in &probes {
        send_text(&mut ws, text);
        match recv(&mut ws) {
            Some(WireMessage::AckError(a)) if a.code == *code && a.episode_id == id => {}
            other => return Err(format!("probe {text:?}: expected {code}, got {other:?}")),
        }
    }
    ws.send(tungstenite::Message::binary(vec![1u8, 2, 3])).unwrap();
    match recv(&mut ws) {
        Some(WireMessage::AckError(a)) if a.code == codes::MALFORMED => {}
        other => return Err(format!("binary frame: expected malformed, got {other:?}")),
    }
    send_text(&mut ws, &action_json(&id, 0, "forward"));
    match recv(&mut ws) {
        Some(WireMessage::Observation(o)) if o.tick == 1 => {}
        other => return Err(format!("valid action after errors did not advance: {other:?}")),
    }
    send_text(&mut ws, &action_json(&id, 0, "forward"));
    match recv(&mut ws) {
        Some(WireMessage::AckError(a)) if a.code == codes::TICK_MISMATCH => {}
        other => return Err(format!("stale tick accepted: {other:?}")),
    }
    drop(ws);
    server.shutdown();

    let server = serve(
        Arc::clone(&world),
        ServerConfig { port: 0, action_timeout: Duration::from_millis(300), ..ServerConfig::default() },
        Arc::new(TemplateProvider),
    )
    .map_err(|e| e.to_string())?;
    let mut ws = raw_connect(&server.url());
    let started = Instant::now();
    let mut end = None;
    while let Some(m) = recv(&mut ws) {
        if let WireMessage::EpisodeEnd(e) = m {
            end = Some(e);
            break;
        }
    }
    let end = end.ok_or("silent client never received episode_end")?;
    check(end.status == EpisodeStatus::Timeout, || format!("silent client ended with {:?}", end.status))?;
    check(started.elapsed() < Duration::from_secs(5), || "timeout took too long".into())?;
    let url = server.url();

    let mut sessions = 0;
    let mut asks_ok = 0;
    for seed in 0..6u64 {
        let plan = action_stream(seed + 100);
        let mut asked_at = Vec::new();
        let mut agent = FnAgent(|o: &askworld::protocol::Observation| {
            let a = plan[o.tick as usize];
            if a == AgentAction::Ask {
                asked_at.push(o.tick);
            }
            a
        });
        let out = client_session(&format!("{url}/?seed={seed}"), &mut agent).map_err(|e| e.to_string())?;
        let end = out.end.as_ref().ok_or("no episode_end")?;
        let ticks: Vec<u32> = out.observations.iter().map(|o| o.tick).collect();
        check(ticks.windows(2).all(|w| w[1] == w[0] + 1) && ticks[0] == 0, || format!("seed {seed}: ticks {ticks:?}"))?;
        let last = *ticks.last().unwrap();
        match end.status {
            EpisodeStatus::StepLimitEnd => check(last == 100, || format!("seed {seed}: step limit at tick {last}"))?,
            EpisodeStatus::CollisionEnd => check(last <= 100, || format!("seed {seed}: collision after the limit"))?,
            s => return Err(format!("seed {seed}: unexpected status {s:?}")),
        }
        let successful: Vec<u32> = asked_at
            .iter()
            .copied()
            .filter(|&t| out.observations.iter().any(|o| o.tick == t + 1 && !o.ask_failed && o.instruction.is_some()))
            .collect();
        let failed = asked_at.len() - successful.len();
        check(end.ndi as usize == successful.len() && end.log.ndi_events == successful, || {
            format!("seed {seed}: ndi {} / events {:?} vs successful asks {successful:?}", end.ndi, end.log.ndi_events)
        })?;
        check(end.metrics.ndi == end.ndi, || format!("seed {seed}: metric NDI disagrees"))?;
        check(
            out.observations.iter().filter(|o| o.ask_failed).count() == failed,
            || format!("seed {seed}: ask_failed flags do not match failed asks"),
        )?;
        asks_ok += successful.len();
        sessions += 1;
    }
    check(asks_ok > 0, || "no ask ever succeeded".into())?;

    let mut agent = FnAgent(|_: &askworld::protocol::Observation| AgentAction::Stop);
    let out = client_session(&url, &mut agent).map_err(|e| e.to_string())?;
    let end = out.end.ok_or("no episode_end after stop")?;
    check(end.status == EpisodeStatus::StoppedEnd && end.ndi == 0 && end.log.trajectory.len() == 1, || {
        format!("stop at tick 0 gave {:?}", end.status)
    })?;
    server.shutdown();
    Ok(format!("7 error probes, binary frame, stale tick, timeout abort; {sessions} full sessions, {asks_ok} counted asks"))
}

// ---------------------------------------------------------------- 8

const LANDMARKS: [&str; 6] = ["Bakery", "City Bank", "Old Mill", "Town Hall", "Pharmacy", "Library"];
const GOALS: [&str; 4] = ["Store A", "Corner Cafe", "Bus Stop", "Museum"];
const EGO_WORDS: [&str; 3] = ["left", "right", "straight"];
const CARDINAL_WORDS: [&str; 8] = ["north", "northeast", "east", "southeast", "south", "southwest", "west", "northwest"];

fn random_sketch(rng: &mut impl Rng) -> RouteSketch {
    let cards = [Cardinal::N, Cardinal::NE, Cardinal::E, Cardinal::SE, Cardinal::S, Cardinal::SW, Cardinal::W, Cardinal::NW];
    let n = rng.random_range(1..=5);
    let segments: Vec<SketchSegment> = (0..n)
        .map(|i| SketchSegment {
            length: rng.random_range(0.5..150.0),
            turn: if i == 0 && rng.random_bool(0.6) {
                Turn::Straight
            } else {
                [Turn::Left, Turn::Right, Turn::Straight][rng.random_range(0..3)]
            },
            cardinal: cards[rng.random_range(0..8)],
            landmark: rng.random_bool(0.5).then(|| {
                let name = LANDMARKS[rng.random_range(0..LANDMARKS.len())];
                LandmarkRef {
                    poi_id: name.to_lowercase(),
                    name: name.into(),
                    side: if rng.random_bool(0.5) { Side::Left } else { Side::Right },
                }
            }),
            start: Vec2::ZERO,
            end: Vec2::ZERO,
        })
        .collect();
    let total_length = segments.iter().map(|s| s.length).sum();
    RouteSketch { segments, total_length }
}

fn random_style(rng: &mut impl Rng) -> NavStyle {
    let direction_type = if rng.random_bool(0.5) { DirectionType::Cardinal } else { DirectionType::Egocentric };
    NavStyle {
        landmark_use: if rng.random_bool(0.5) { LandmarkUse::High } else { LandmarkUse::Low },
        direction_type,
        distance_description: if rng.random_bool(0.5) { DistanceDescription::Precise } else { DistanceDescription::Vague },
        utterance_length: [UtteranceLength::Short, UtteranceLength::Medium, UtteranceLength::Long][rng.random_range(0..3)],
        perspective: if direction_type == DirectionType::Cardinal && rng.random_bool(0.7) {
            Perspective::Survey
        } else {
            Perspective::Route
        },
    }
}

fn words(text: &str, names: &[&str]) -> Vec<String> {
    let mut t = text.to_string();
    for n in names {
        t = t.replace(n, " ");
    }
    t.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

fn instruction_properties() -> Outcome {
    let mut rng = rng_for(8, "acceptance-instructions", &[]);
    for case in 0..1000 {
        let sketch = random_sketch(&mut rng);
        let style = random_style(&mut rng);
        let goal = GOALS[rng.random_range(0..GOALS.len())];
        let text = render_template(&sketch, &style, goal);
        check(render_template(&sketch, &style, goal) == text, || format!("case {case}: rendering is not pure"))?;
        let req = InstructionRequest {
            sketch: sketch.clone(),
            style,
            goal: GoalRef { id: "g".into(), name: goal.into() },
            profile_summary: format!("case {case}"),
        };
        check(TemplateProvider.compose(&req).ok().as_deref() == Some(text.as_str()), || {
            format!("case {case}: provider output differs from the template")
        })?;

        let mut names: Vec<&str> = LANDMARKS.to_vec();
        names.push(goal);
        let toks = words(&text, &names);
        let (allowed, banned): (&[&str], &[&str]) = match style.direction_type {
            DirectionType::Egocentric => (&EGO_WORDS, &CARDINAL_WORDS),
            DirectionType::Cardinal => (&CARDINAL_WORDS, &EGO_WORDS),
        };
        check(!toks.iter().any(|w| banned.contains(&w.as_str())), || {
            format!("case {case}: {:?} text uses a foreign direction word: {text}", style.direction_type)
        })?;
        check(toks.iter().any(|w| allowed.contains(&w.as_str())), || format!("case {case}: no direction word: {text}"))?;

        let numbers: Vec<u64> = toks.iter().filter_map(|w| w.parse().ok()).collect();
        match style.distance_description {
            DistanceDescription::Precise => {
                let expect: Vec<u64> =
                    sketch.segments.iter().map(|s| rounded_distance(s.length)).filter(|&m| m > 0).collect();
                check(numbers == expect, || format!("case {case}: numbers {numbers:?} vs rounded legs {expect:?}"))?;
                check(expect.iter().all(|m| m % 5 == 0), || format!("case {case}: rounding is off"))?;
            }
            DistanceDescription::Vague => check(numbers.is_empty(), || format!("case {case}: vague text has numbers: {text}"))?,
        }

        let counts: Vec<usize> = [UtteranceLength::Short, UtteranceLength::Medium, UtteranceLength::Long]
            .iter()
            .map(|&u| render_template(&sketch, &NavStyle { utterance_length: u, ..style }, goal).split_whitespace().count())
            .collect();
        check(counts[0] < counts[1] && counts[1] < counts[2], || format!("case {case}: word counts {counts:?}"))?;
    }
    Ok("1000 fuzzed sketch/style pairs".into())
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("metrics match an independent reference", Duration::from_secs(10), metrics_oracle),
        ("asking improves success on duplicate stores", Duration::from_secs(300), ask_improves_success),
        ("A* costs equal Dijkstra costs", Duration::from_secs(30), astar_optimality),
        ("social force sanity", Duration::from_secs(5), sfm_sanity),
        ("occupancy accuracy", Duration::from_secs(60), occupancy_accuracy),
        ("end-to-end determinism", Duration::from_secs(60), determinism),
        ("protocol conformance", Duration::from_secs(60), protocol_conformance),
        ("instruction properties", Duration::from_secs(60), instruction_properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let result = match result {
            Ok(d) if took > *limit => Err(format!("took {took:.1?}, limit {limit:?} ({d})")),
            r => r,
        };
        match result {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
