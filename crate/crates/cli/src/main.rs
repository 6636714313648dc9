//! `ovc`: generate synthetic scenarios, track them, evaluate losses, render
//! results and run the self-test suites.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 invariant failure.

mod losses;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ovc_core::io::{
    clip_file_name, load_config, metrics_csv, read_clip_dir, read_track_dump, render_frame, render_trajectories,
    track_trajectories, write_clip_record, write_track_dump, MetricsRow, RunConfig,
};
use ovc_core::synthetic::{
    build_scenario, disappear_scenario, ground_truth_from_clips, render_scenario, scenario_metrics, ClipLayout,
    ScenarioKind,
};
use ovc_core::tracker::run_near_online;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] ovc_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) | CliError::Usage(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ovc", version, about = "Occlusion-aware video instance segmentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write clip records of a synthetic scenario.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_scenario)]
        scenario: ScenarioKind,
        #[arg(long)]
        out: PathBuf,
        /// Run configuration; only clip_len, overlap and seed are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Clips between the disappearance and the return (disappear only).
        #[arg(long)]
        gap: Option<usize>,
    },
    /// Track clip records and write a track dump and metrics.
    Track {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        tmem: Option<usize>,
        #[arg(long = "tau-new")]
        tau_new: Option<f64>,
        #[arg(long = "tau-conf")]
        tau_conf: Option<f64>,
        /// Any config key, as KEY=VALUE. May be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate the training losses of detections against ground truth.
    Losses {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also compare analytic gradients with finite differences.
        #[arg(long)]
        check_grads: bool,
    },
    /// Write PPM frames and a trajectory SVG of a track dump.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every oracle and invariant suite.
    Selftest {
        /// Run only this suite.
        #[arg(long)]
        suite: Option<usize>,
    },
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e: ovc_core::Error| e.to_string())
}

/// Written next to generated clips so `track` can label its metrics.
#[derive(Serialize, Deserialize)]
struct Manifest {
    scenario: String,
    seed: u64,
    frames: usize,
    clips: usize,
}

const MANIFEST: &str = "manifest.json";

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("OVC_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("OVC_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn parse_set(items: &[String]) -> CliResult<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("--set {s:?}: expected KEY=VALUE")))
        })
        .collect()
}

fn generate(seed: Option<u64>, kind: ScenarioKind, out: &Path, config: Option<&Path>, gap: Option<usize>) -> CliResult<()> {
    let cfg = load_config(config, &[])?;
    let seed = seed.unwrap_or(cfg.seed);
    let layout = ClipLayout { clip_len: cfg.clip_len, overlap: cfg.overlap() };
    let scenario = match (kind, gap) {
        (ScenarioKind::Disappear, Some(g)) => disappear_scenario(seed, g, layout)?,
        (ScenarioKind::Disappear, None) => {
            disappear_scenario(seed, ovc_core::synthetic::DEFAULT_DISAPPEAR_GAP, layout)?
        }
        (_, Some(_)) => return Err(CliError::Usage("--gap only applies to the disappear scenario".into())),
        (k, None) => build_scenario(k, seed),
    };
    let clips = render_scenario(&scenario, layout)?;
    fs::create_dir_all(out)?;
    for c in &clips {
        write_clip_record(c, &out.join(clip_file_name(c.clip_index)))?;
    }
    let manifest = Manifest { scenario: kind.name().into(), seed, frames: scenario.frames, clips: clips.len() };
    fs::write(out.join(MANIFEST), serde_json::to_string(&manifest).expect("manifest serializes") + "\n")?;
    println!("wrote {} clips of {} (seed {seed}, {} frames) to {}", clips.len(), kind, scenario.frames, out.display());
    Ok(())
}

fn read_manifest(dir: &Path) -> Option<Manifest> {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST)).ok()?).ok()
}

fn track(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<()> {
    let clips = read_clip_dir(input)?;
    if clips.is_empty() {
        return Err(CliError::Usage(format!("no clip records in {}", input.display())));
    }
    let canvas = clips[0].canvas;
    if let Some(c) = clips.iter().find(|c| c.canvas != canvas) {
        return Err(CliError::Usage(format!("clip {} has canvas {:?}, expected {canvas:?}", c.clip_index, c.canvas)));
    }
    let dets: Vec<_> = clips.iter().map(|c| c.clip_detections()).collect();
    let mut tracks = run_near_online(&dets, &cfg.tracker_config())?;
    (tracks.height, tracks.width) = canvas;

    fs::create_dir_all(out)?;
    write_track_dump(&tracks, &out.join("tracks.json"))?;
    let manifest = read_manifest(input);
    let mut rows = Vec::new();
    if clips.iter().all(|c| c.ground_truth.is_some()) {
        let metrics = scenario_metrics(&ground_truth_from_clips(&clips)?, &tracks);
        rows.push(MetricsRow {
            scenario: manifest.as_ref().map_or_else(|| "unknown".into(), |m| m.scenario.clone()),
            seed: manifest.as_ref().map_or(cfg.seed, |m| m.seed),
            metrics,
        });
        println!(
            "{} tracks over {} frames: id_switches={} assoc_acc={:.4} mean_iou={:.4}",
            tracks.tracks.len(),
            tracks.frames,
            metrics.id_switches,
            metrics.assoc_acc,
            metrics.mean_iou
        );
    } else {
        println!("{} tracks over {} frames (no ground truth, metrics skipped)", tracks.tracks.len(), tracks.frames);
    }
    fs::write(out.join("metrics.csv"), metrics_csv(&rows))?;
    Ok(())
}

fn render(input: &Path, tracks_path: &Path, out: &Path) -> CliResult<()> {
    let tracks = read_track_dump(tracks_path)?;
    let clips = read_clip_dir(input)?;
    if let Some(c) = clips.iter().find(|c| c.canvas != (tracks.height, tracks.width)) {
        return Err(CliError::Usage(format!(
            "clip {} canvas {:?} differs from the track dump's {:?}",
            c.clip_index,
            c.canvas,
            (tracks.height, tracks.width)
        )));
    }
    fs::create_dir_all(out)?;
    for f in 0..tracks.frames {
        fs::write(out.join(format!("frame_{f:04}.ppm")), render_frame(tracks.height, tracks.width, &tracks.frame(f)))?;
    }
    let svg = render_trajectories(tracks.height, tracks.width, &track_trajectories(&tracks));
    fs::write(out.join("trajectories.svg"), svg)?;
    println!("wrote {} frames and trajectories.svg to {}", tracks.frames, out.display());
    Ok(())
}

fn selftest(suite: Option<usize>) -> CliResult<()> {
    let reports = match suite {
        Some(id) => vec![ovc_core::selftest::run_suite(id).ok_or_else(|| CliError::Usage(format!("no suite {id}")))?],
        None => ovc_core::selftest::run_all(),
    };
    for r in &reports {
        println!(
            "[{}] {:>2} {:<22} {:>9.3}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed suites: {}", failed.join(", "))))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate { seed, scenario, out, config, gap } => generate(seed, scenario, &out, config.as_deref(), gap),
        Command::Track { config, input, out, beta1, beta2, tmem, tau_new, tau_conf, set } => {
            let mut overrides = parse_set(&set)?;
            let flags = [
                ("beta1", beta1.map(|v| v.to_string())),
                ("beta2", beta2.map(|v| v.to_string())),
                ("t_mem", tmem.map(|v| v.to_string())),
                ("tau_new", tau_new.map(|v| v.to_string())),
                ("tau_conf", tau_conf.map(|v| v.to_string())),
            ];
            overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
            let cfg = load_config(config.as_deref(), &overrides)?;
            track(&cfg, &input, &out)
        }
        Command::Losses { input, config, check_grads } => {
            let cfg = load_config(config.as_deref(), &[])?;
            losses::run(&cfg, &input, check_grads)
        }
        Command::Render { input, tracks, out } => render(&input, &tracks, &out),
        Command::Selftest { suite } => selftest(suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
