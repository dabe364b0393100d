//! Command-line front end for the `fs2d` registration library.
//!
//! Subcommands: `register`, `peaks`, `odometry`, `synth`, `eval`. Exit codes:
//! 0 success, 2 input/config error, 3 processing error. All commands are
//! deterministic given their inputs, flags, and seed.

use clap::{Args, Parser, Subcommand};
use fs2d::dataset::{
    load_ground_truth, load_polar_scan, save_ground_truth, save_polar_scan, synth_scene,
    GroundTruthRecord, SceneSpec,
};
use fs2d::eval::{
    evaluate_trajectories, export_trajectory, load_trajectory, EvalSettings, ReportConfig,
    TrajectoryFormat,
};
use fs2d::grid::despeckle;
use fs2d::odometry::run_odometry;
use fs2d::registration::register;
use fs2d::{
    phase_correlate, polar_to_cartesian, preprocess, CartesianGrid64, OdometryConfig64,
    PolarScan64, Pose2D64, RegistrationConfig64, RegistrationResult64,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_USAGE: u8 = 2;
const EXIT_PROCESSING: u8 = 3;

/// Command failure with the exit code it maps to.
enum CliError {
    Usage(String),
    Processing(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Input-shaped library errors (unreadable files, malformed documents,
/// geometry mismatches) map to exit 2; everything else is a processing error.
fn from_lib(err: fs2d::Error) -> CliError {
    use fs2d::Error::*;
    match err {
        Io(_) | Parse { .. } | ParseLine { .. } | InvalidInput(_) | GeometryMismatch(_)
        | SizeMismatch(_, _) => CliError::Usage(err.to_string()),
        other => CliError::Processing(other.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "fs2d", version, about = "Frequency-domain 2D radar scan registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flag overrides applied on top of the config file (flags win).
#[derive(Args, Clone, Default)]
struct Overrides {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Cartesian grid side length, cells (even, >= 32)
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    /// Cell size in meters
    #[arg(long, global = true)]
    cell_size: Option<f64>,
    /// Spherical-harmonic bandwidth for rotation estimation
    #[arg(long, global = true)]
    bandwidth: Option<usize>,
    /// Frames between registered scan pairs
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Outlier threshold on the translation confidence ratio
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Maximum number of motion hypotheses
    #[arg(long, global = true)]
    nms_k: Option<usize>,
    /// Peak suppression radius, cells
    #[arg(long, global = true)]
    nms_radius: Option<usize>,
    /// Drop peaks below this fraction of the strongest
    #[arg(long, global = true)]
    rel_threshold: Option<f64>,
    /// Quadratic sub-cell refinement of translation peaks
    #[arg(long, global = true)]
    subcell: Option<bool>,
    /// Polar-domain ghost-beam and salt removal before gridding
    #[arg(long, global = true)]
    despeckle: Option<bool>,
    /// Worker threads for odometry pair registration
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed overriding the scene specification
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the translation correlation surface to this path
    #[arg(long, global = true, value_name = "PATH")]
    dump_surface: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Register two scans and write the result document
    Register {
        scan_a: PathBuf,
        scan_b: PathBuf,
        /// Output JSON path (stdout when omitted)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Rank all motion hypotheses for a scan pair
    Peaks {
        scan_a: PathBuf,
        scan_b: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Chain strided pair registrations over a directory of scans
    Odometry {
        /// Directory of native scan files, processed in name order
        scan_dir: PathBuf,
        /// Trajectory output path
        #[arg(long, short, default_value = "trajectory.csv")]
        output: PathBuf,
        /// Trajectory output format
        #[arg(long, value_parser = ["csv", "geojson"], default_value = "csv")]
        format: String,
    },
    /// Generate scan files and ground truth from a scene specification
    Synth {
        /// TOML scene specification
        spec: PathBuf,
        #[arg(long)]
        frames: usize,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Compare an estimated trajectory against ground truth
    Eval {
        trajectory: PathBuf,
        truth: PathBuf,
        /// Report JSON path (stdout table only when omitted)
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Maximum time offset for ground-truth interpolation, seconds
        #[arg(long, default_value_t = 0.5)]
        max_dt: f64,
    },
}

/// On-disk run configuration; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    registration: RegistrationConfig64,
    stride: usize,
    jobs: usize,
    seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            registration: RegistrationConfig64::default(),
            stride: 5,
            jobs: 1,
            seed: None,
        }
    }
}

fn load_run_config(overrides: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let reg = &mut cfg.registration;
    if let Some(v) = overrides.grid_size {
        reg.grid.grid_size = v;
    }
    if let Some(v) = overrides.cell_size {
        reg.grid.cell_size = v;
    }
    if let Some(v) = overrides.bandwidth {
        reg.bandwidth = v;
    }
    if let Some(v) = overrides.tau {
        reg.tau = v;
    }
    if let Some(v) = overrides.nms_k {
        reg.nms_k = v;
    }
    if let Some(v) = overrides.nms_radius {
        reg.nms_radius = v;
    }
    if let Some(v) = overrides.rel_threshold {
        reg.rel_threshold = v;
    }
    if let Some(v) = overrides.subcell {
        reg.subcell = v;
    }
    if let Some(v) = overrides.despeckle {
        reg.despeckle = v;
    }
    if let Some(v) = overrides.stride {
        cfg.stride = v;
    }
    if let Some(v) = overrides.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = overrides.seed {
        cfg.seed = Some(v);
    }
    cfg.registration.validate().map_err(|e| CliError::usage(e.to_string()))?;
    if cfg.stride == 0 {
        return Err(CliError::usage("stride must be >= 1"));
    }
    if cfg.jobs == 0 {
        return Err(CliError::usage("jobs must be >= 1"));
    }
    Ok(cfg)
}

fn load_scan(path: &Path) -> CliResult<PolarScan64> {
    load_polar_scan(path)
        .map_err(|e| CliError::usage(format!("cannot load scan {}: {e}", path.display())))
}

fn write_json<T: Serialize>(doc: &T, output: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Processing(format!("serializing result: {e}")))?;
    match output {
        Some(path) => fs::write(path, text + "\n")
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Registration document: result plus the config that produced it.
#[derive(Serialize)]
struct RegisterDoc<'a> {
    result: &'a RegistrationResult64,
    config: &'a RegistrationConfig64,
}

fn preprocessed_grid(scan: &PolarScan64, cfg: &RegistrationConfig64) -> CliResult<CartesianGrid64> {
    let scan = if cfg.despeckle {
        despeckle(scan)
    } else {
        scan.clone()
    };
    Ok(preprocess(
        &polar_to_cartesian(&scan, &cfg.grid).map_err(from_lib)?,
        &cfg.grid,
    ))
}

/// Plain-text matrix dump of the translation correlation surface at the
/// estimated rotation: one-line header `fs2d-surface <size>`, then one
/// whitespace-separated row per line.
fn dump_surface(
    scan_a: &PolarScan64,
    scan_b: &PolarScan64,
    result: &RegistrationResult64,
    cfg: &RegistrationConfig64,
    path: &Path,
) -> CliResult {
    let ga = preprocessed_grid(scan_a, cfg)?;
    let gb = preprocessed_grid(scan_b, cfg)?.rotated(result.ego_motion.theta);
    let surface = phase_correlate(&ga, &gb).map_err(from_lib)?;
    let mut text = format!("fs2d-surface {}\n", surface.size);
    for row in 0..surface.size {
        for col in 0..surface.size {
            if col > 0 {
                text.push(' ');
            }
            write!(text, "{}", surface.values[row * surface.size + col]).unwrap();
        }
        text.push('\n');
    }
    fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_register(
    scan_a: &Path,
    scan_b: &Path,
    output: Option<&Path>,
    overrides: &Overrides,
) -> CliResult {
    let cfg = load_run_config(overrides)?;
    let a = load_scan(scan_a)?;
    let b = load_scan(scan_b)?;
    let result = register(&a, &b, &cfg.registration)
        .map_err(|e| CliError::Processing(e.to_string()))?;
    if let Some(path) = &overrides.dump_surface {
        dump_surface(&a, &b, &result, &cfg.registration, path)?;
    }
    write_json(
        &RegisterDoc {
            result: &result,
            config: &cfg.registration,
        },
        output,
    )
}

fn sorted_scan_paths(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "fs2d"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn cmd_odometry(scan_dir: &Path, output: &Path, format: &str, overrides: &Overrides) -> CliResult {
    let cfg = load_run_config(overrides)?;
    let paths = sorted_scan_paths(scan_dir)?;
    let mut scans = Vec::with_capacity(paths.len());
    for path in &paths {
        scans.push(load_scan(path)?);
    }
    if scans.len() < cfg.stride + 1 {
        return Err(CliError::usage(format!(
            "odometry needs at least stride + 1 = {} scans, found {}",
            cfg.stride + 1,
            scans.len()
        )));
    }
    let odo = OdometryConfig64 {
        registration: cfg.registration.clone(),
        stride: cfg.stride,
        jobs: cfg.jobs,
        ..OdometryConfig64::default()
    };
    let start = Instant::now();
    let (trajectory, results) = run_odometry(&scans, Pose2D64::origin(), &odo)
        .map_err(|e| CliError::Processing(e.to_string()))?;
    let elapsed = start.elapsed();
    let fmt = if format == "geojson" {
        TrajectoryFormat::GeoJson
    } else {
        TrajectoryFormat::Csv
    };
    export_trajectory(&trajectory, output, fmt).map_err(from_lib)?;
    let pairs = results.len();
    let outliers = results.iter().filter(|r| r.is_outlier).count();
    let per_pair_ms = elapsed.as_secs_f64() * 1000.0 / pairs.max(1) as f64;
    println!("scans              {}", scans.len());
    println!("pairs registered   {pairs}");
    println!("outliers flagged   {outliers}");
    println!("poses written      {}", trajectory.len());
    println!("mean ms/pair       {per_pair_ms:.1}");
    println!("trajectory         {}", output.display());
    Ok(())
}

fn cmd_peaks(
    scan_a: &Path,
    scan_b: &Path,
    output: Option<&Path>,
    overrides: &Overrides,
) -> CliResult {
    let cfg = load_run_config(overrides)?;
    let a = load_scan(scan_a)?;
    let b = load_scan(scan_b)?;
    let result = register(&a, &b, &cfg.registration)
        .map_err(|e| CliError::Processing(e.to_string()))?;
    if let Some(path) = &overrides.dump_surface {
        dump_surface(&a, &b, &result, &cfg.registration, path)?;
    }
    write_json(&result.hypotheses, output)
}

fn cmd_synth(spec_path: &Path, frames: usize, out_dir: &Path, overrides: &Overrides) -> CliResult {
    if frames == 0 {
        return Err(CliError::usage("--frames must be >= 1"));
    }
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::usage(format!("cannot read spec {}: {e}", spec_path.display())))?;
    let mut spec: SceneSpec = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("spec {}: {e}", spec_path.display())))?;
    if let Some(seed) = overrides.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let out = synth_scene::<f64>(&spec, frames)
        .map_err(|e| CliError::Processing(e.to_string()))?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    for (k, scan) in out.scans.iter().enumerate() {
        let path = out_dir.join(format!("scan_{k:06}.fs2d"));
        save_polar_scan(scan, &path).map_err(from_lib)?;
    }
    let records: Vec<GroundTruthRecord<f64>> = out
        .trajectory
        .poses
        .iter()
        .map(|p| GroundTruthRecord {
            timestamp: p.timestamp,
            pose: *p,
        })
        .collect();
    save_ground_truth(&records, &out_dir.join("truth.csv")).map_err(from_lib)?;
    if !out.object_motions.is_empty() {
        let mut text = String::from("object,frame,dx,dy,dtheta\n");
        for (obj, motions) in out.object_motions.iter().enumerate() {
            for (frame, m) in motions.iter().enumerate() {
                writeln!(text, "{obj},{frame},{},{},{}", m.dx, m.dy, m.theta).unwrap();
            }
        }
        fs::write(out_dir.join("objects.csv"), text).map_err(|e| {
            CliError::usage(format!("cannot write {}: {e}", out_dir.display()))
        })?;
    }
    for warning in &out.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "wrote {} scans + truth.csv to {}",
        out.scans.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_eval(
    traj_path: &Path,
    truth_path: &Path,
    output: Option<&Path>,
    max_dt: f64,
    overrides: &Overrides,
) -> CliResult {
    let cfg = load_run_config(overrides)?;
    let estimate = load_trajectory::<f64>(traj_path)
        .map_err(|e| CliError::usage(format!("trajectory {}: {e}", traj_path.display())))?;
    let truth_records = load_ground_truth::<f64>(truth_path)
        .map_err(|e| CliError::usage(format!("ground truth {}: {e}", truth_path.display())))?;
    let truth: Vec<Pose2D64> = truth_records
        .iter()
        .map(|r| Pose2D64 {
            timestamp: r.timestamp,
            ..r.pose
        })
        .collect();
    let report = evaluate_trajectories(
        &estimate,
        &truth,
        max_dt,
        &EvalSettings::default(),
        ReportConfig {
            stride: cfg.stride,
            cell_size: cfg.registration.grid.cell_size,
            tau: cfg.registration.tau,
        },
    )
    .map_err(from_lib)?;
    print!("{}", report.table());
    if let Some(path) = output {
        write_json(&report, Some(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Register {
            scan_a,
            scan_b,
            output,
        } => cmd_register(scan_a, scan_b, output.as_deref(), &cli.overrides),
        Command::Peaks {
            scan_a,
            scan_b,
            output,
        } => cmd_peaks(scan_a, scan_b, output.as_deref(), &cli.overrides),
        Command::Odometry {
            scan_dir,
            output,
            format,
        } => cmd_odometry(scan_dir, output, format, &cli.overrides),
        Command::Synth {
            spec,
            frames,
            out_dir,
        } => cmd_synth(spec, *frames, out_dir, &cli.overrides),
        Command::Eval {
            trajectory,
            truth,
            output,
            max_dt,
        } => cmd_eval(trajectory, truth, output.as_deref(), *max_dt, &cli.overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Processing(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PROCESSING)
        }
    }
}
