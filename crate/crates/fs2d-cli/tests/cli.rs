//! End-to-end tests of the `fs2d` binary: exit codes, document outputs, and
//! determinism, driven entirely through the command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fs2d(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fs2d"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCENE: &str = r#"
seed = 42
ego_dx = 0.4
ego_dy = 0.1
ego_theta = 0.01

[sensor]
max_range = 80.0
azimuth_count = 400
range_resolution = 0.25
frame_period = 0.25

[[static_targets]]
reflectivity = 0.9
shape = { kind = "wall", x1 = -25.0, y1 = -12.0, x2 = 18.0, y2 = -15.0 }

[[static_targets]]
reflectivity = 0.8
shape = { kind = "wall", x1 = -20.0, y1 = 14.0, x2 = 22.0, y2 = 18.0 }

[[static_targets]]
reflectivity = 1.0
shape = { kind = "block", cx = 12.0, cy = -3.0, width = 6.0, height = 4.0, angle = 0.4 }

[[static_targets]]
reflectivity = 0.7
shape = { kind = "block", cx = -14.0, cy = 6.0, width = 5.0, height = 7.0, angle = 1.1 }

[[static_targets]]
reflectivity = 0.6
shape = { kind = "point", x = 3.0, y = 24.0 }
"#;

/// Write the shared scene spec and generate `frames` scans into `dir/scans`.
fn synth_scene_dir(dir: &Path, frames: usize) -> PathBuf {
    let spec = dir.join("scene.toml");
    fs::write(&spec, SCENE).unwrap();
    let scans = dir.join("scans");
    let out = fs2d(
        &[
            "synth",
            spec.to_str().unwrap(),
            "--frames",
            &frames.to_string(),
            "--out-dir",
            scans.to_str().unwrap(),
        ],
        dir,
    );
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
    scans
}

#[test]
fn register_same_scan_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let scan = scans.join("scan_000000.fs2d");
    let out = fs2d(
        &[
            "register",
            scan.to_str().unwrap(),
            scan.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let motion = &doc["result"]["ego_motion"];
    assert_eq!(motion["dx"].as_f64().unwrap(), 0.0);
    assert_eq!(motion["dy"].as_f64().unwrap(), 0.0);
    assert_eq!(motion["theta"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["result"]["is_outlier"], serde_json::Value::Bool(false));
}

#[test]
fn register_missing_file_exits_2_naming_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fs2d(&["register", "no_such_scan.fs2d", "also_missing.fs2d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no_such_scan.fs2d"));
}

#[test]
fn register_recovers_generated_motion() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 2);
    let a = scans.join("scan_000000.fs2d");
    let b = scans.join("scan_000001.fs2d");
    let result = tmp.path().join("result.json");
    let out = fs2d(
        &[
            "register",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--output",
            result.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    let motion = &doc["result"]["ego_motion"];
    // scene applies (0.4, 0.1, 0.01) per frame; translation is bounded by the
    // half cell diagonal of the 0.75 m grid, rotation by the profile step
    let dx = motion["dx"].as_f64().unwrap();
    let dy = motion["dy"].as_f64().unwrap();
    let theta = motion["theta"].as_f64().unwrap();
    assert!(((dx - 0.4).powi(2) + (dy - 0.1).powi(2)).sqrt() < 0.54, "dx {dx} dy {dy}");
    assert!((theta - 0.01).abs() < 0.5f64.to_radians(), "theta {theta}");
}

#[test]
fn dump_surface_writes_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let scan = scans.join("scan_000000.fs2d");
    let dump = tmp.path().join("surface.txt");
    let out = fs2d(
        &[
            "register",
            scan.to_str().unwrap(),
            scan.to_str().unwrap(),
            "--dump-surface",
            dump.to_str().unwrap(),
            "--output",
            tmp.path().join("r.json").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fs2d-surface 256"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 256);
    assert_eq!(rows[0].split_whitespace().count(), 256);
}

#[test]
fn peaks_static_pair_is_single_identity_with_k1() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let scan = scans.join("scan_000000.fs2d");
    let out = fs2d(
        &[
            "peaks",
            scan.to_str().unwrap(),
            scan.to_str().unwrap(),
            "--nms-k",
            "1",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let hyps: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let hyps = hyps.as_array().unwrap();
    assert_eq!(hyps.len(), 1);
    assert_eq!(hyps[0]["rank"], serde_json::json!(1));
    assert_eq!(hyps[0]["motion"]["dx"].as_f64().unwrap(), 0.0);
    assert_eq!(hyps[0]["motion"]["dy"].as_f64().unwrap(), 0.0);
}

#[test]
fn odometry_chains_and_reports_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 11);
    let traj = tmp.path().join("trajectory.csv");
    let out = fs2d(
        &[
            "odometry",
            scans.to_str().unwrap(),
            "--output",
            traj.to_str().unwrap(),
            "--stride",
            "5",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("pairs registered   2"), "{summary}");
    assert!(summary.contains("mean ms/pair"), "{summary}");
    let csv = fs::read_to_string(&traj).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "timestamp,x,y,heading,outlier");
    // 11 scans at stride 5 chain into origin + 2 poses
    assert_eq!(lines.len(), 4);

    // endpoint close to 10 frames of (0.4, 0.1, 0.01) motion
    let last: Vec<f64> = lines[3].split(',').take(4).map(|v| v.parse().unwrap()).collect();
    let (ex, ey) = truth_endpoint(0.4, 0.1, 0.01, 10);
    let err = ((last[1] - ex).powi(2) + (last[2] - ey).powi(2)).sqrt();
    assert!(err < 2.0 * 0.54, "endpoint error {err}");
}

/// Chain `frames` identical per-frame motions from the origin.
fn truth_endpoint(dx: f64, dy: f64, dtheta: f64, frames: usize) -> (f64, f64) {
    let (mut x, mut y, mut h) = (0.0, 0.0, 0.0f64);
    for _ in 0..frames {
        x += h.cos() * dx - h.sin() * dy;
        y += h.sin() * dx + h.cos() * dy;
        h += dtheta;
    }
    (x, y)
}

#[test]
fn odometry_with_too_few_scans_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 3);
    let out = fs2d(
        &["odometry", scans.to_str().unwrap(), "--stride", "5"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stride"));
}

#[test]
fn synth_is_deterministic_and_writes_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth_scene_dir(tmp.path(), 3);
    let sub = tmp.path().join("again");
    fs::create_dir(&sub).unwrap();
    let b = synth_scene_dir(&sub, 3);
    for name in ["scan_000000.fs2d", "scan_000001.fs2d", "scan_000002.fs2d", "truth.csv"] {
        let fa = fs::read(a.join(name)).unwrap();
        let fb = fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between identical runs");
    }
    let truth = fs::read_to_string(a.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().next(), Some("timestamp,x,y,heading"));
    assert_eq!(truth.lines().count(), 4);
}

#[test]
fn synth_single_frame_writes_one_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let files: Vec<_> = fs::read_dir(&scans)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(files.contains(&"scan_000000.fs2d".to_string()));
    assert!(files.contains(&"truth.csv".to_string()));
    assert_eq!(files.len(), 2);
}

#[test]
fn synth_rejects_unknown_spec_field() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("bad.toml");
    fs::write(&spec, "seed = 1\nwibble = 3\n").unwrap();
    let out = fs2d(
        &[
            "synth",
            spec.to_str().unwrap(),
            "--frames",
            "1",
            "--out-dir",
            tmp.path().join("out").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("wibble"), "{}", stderr(&out));
}

#[test]
fn eval_end_to_end_report_within_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 11);
    let traj = tmp.path().join("trajectory.csv");
    let out = fs2d(
        &["odometry", scans.to_str().unwrap(), "--output", traj.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report_path = tmp.path().join("report.json");
    let out = fs2d(
        &[
            "eval",
            traj.to_str().unwrap(),
            scans.join("truth.csv").to_str().unwrap(),
            "--output",
            report_path.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("avg rotation error"), "{table}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["pair_count"], serde_json::json!(2));
    // each strided pair spans 5 frames; translation error stays within the
    // per-pair half cell diagonal and rotation within half a degree
    assert!(report["avg_translation_error_m"].as_f64().unwrap() < 0.54);
    assert!(report["avg_rotation_error_deg"].as_f64().unwrap() < 0.5);
}

#[test]
fn eval_mismatched_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let traj = tmp.path().join("traj.csv");
    let truth = tmp.path().join("truth.csv");
    fs::write(&traj, "timestamp,x,y,heading,outlier\n0,0,0,0,0\n1,1,0,0,0\n").unwrap();
    // truth covers a disjoint time span, so interpolation must fail
    fs::write(&truth, "timestamp,x,y,heading\n10,0,0,0\n11,1,0,0\n").unwrap();
    let out = fs2d(
        &["eval", traj.to_str().unwrap(), truth.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_applies_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let scan = scans.join("scan_000000.fs2d");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "[registration]\nnms_k = 1\ntau = 1.25\n\n[registration.grid]\ngrid_size = 128\n",
    )
    .unwrap();
    let out = fs2d(
        &[
            "register",
            scan.to_str().unwrap(),
            scan.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--tau",
            "2.0",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["config"]["grid"]["grid_size"], serde_json::json!(128));
    assert_eq!(doc["config"]["nms_k"], serde_json::json!(1));
    // the flag overrides the file value
    assert_eq!(doc["config"]["tau"].as_f64().unwrap(), 2.0);
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scans = synth_scene_dir(tmp.path(), 1);
    let scan = scans.join("scan_000000.fs2d");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "bogus_key = true\n").unwrap();
    let out = fs2d(
        &[
            "register",
            scan.to_str().unwrap(),
            scan.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus_key"), "{}", stderr(&out));
}
