//! Comparison of estimated motions and trajectories against ground truth.

use crate::error::{Error, Result};
use crate::odometry::{relative_motion, Pose2D, Trajectory};
use crate::registration::{RegistrationResult, RigidMotion2D};
use crate::rotation::normalize_angle;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// E[norm of a uniform offset in a unit cell] = (sqrt(2) + asinh(1)) / 6.
/// The fixed average translation error introduced by integer-cell estimation.
pub fn expected_discretization_error(cell_size: f64) -> f64 {
    (std::f64::consts::SQRT_2 + 1.0f64.asinh()) / 6.0 * cell_size
}

/// Half-diagonal of a cell: the worst case (not the mean) of the same
/// discretization error.
pub fn half_diagonal_bound(cell_size: f64) -> f64 {
    std::f64::consts::SQRT_2 / 2.0 * cell_size
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairErrorRecord {
    pub rotation_error_deg: f64,
    pub translation_error_m: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Exclude flagged pairs from the error averages.
    pub exclude_flagged: bool,
    /// Optional alternative outlier rule: rotation error above this many
    /// degrees counts as flagged, independent of confidence.
    pub error_threshold_deg: Option<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            exclude_flagged: true,
            error_threshold_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub stride: usize,
    pub cell_size: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub pair_count: usize,
    pub avg_rotation_error_deg: f64,
    pub rotation_outlier_fraction: f64,
    pub avg_translation_error_m: f64,
    /// Mean translation error expected from integer-cell discretization
    /// alone (uniform sub-cell offsets).
    pub expected_discretization_error_m: f64,
    /// Half-diagonal of a cell: upper bound of the same discretization
    /// error, not its mean.
    pub half_diagonal_bound_m: f64,
    pub per_pair: Vec<PairErrorRecord>,
    pub config: ReportConfig,
}

impl EvaluationReport {
    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("pairs evaluated          {}\n", self.pair_count));
        s.push_str(&format!(
            "avg rotation error       {:.4} deg\n",
            self.avg_rotation_error_deg
        ));
        s.push_str(&format!(
            "rotation outliers        {:.2} %\n",
            100.0 * self.rotation_outlier_fraction
        ));
        s.push_str(&format!(
            "avg translation error    {:.4} m\n",
            self.avg_translation_error_m
        ));
        s.push_str(&format!(
            "discretization mean      {:.4} m (expected from integer cells)\n",
            self.expected_discretization_error_m
        ));
        s.push_str(&format!(
            "discretization bound     {:.4} m (half cell diagonal, worst case)\n",
            self.half_diagonal_bound_m
        ));
        s
    }
}

/// Rotation error in degrees and translation error in meters, both measured
/// in the frame of the first scan.
pub fn pair_errors<T: Scalar>(est: &RigidMotion2D<T>, truth: &RigidMotion2D<T>) -> (f64, f64) {
    let rot = normalize_angle(est.theta - truth.theta).abs().as_f64().to_degrees();
    let dx = (est.dx - truth.dx).as_f64();
    let dy = (est.dy - truth.dy).as_f64();
    (rot, (dx * dx + dy * dy).sqrt())
}

/// Aggregate per-pair errors. Flagged pairs (confidence outliers, or the
/// optional error-threshold rule) are excluded from the averages when
/// `settings.exclude_flagged` is set; the outlier fraction always counts
/// them over all pairs.
pub fn evaluate<T: Scalar>(
    results: &[RegistrationResult<T>],
    truth_motions: &[RigidMotion2D<T>],
    settings: &EvalSettings,
    config: ReportConfig,
) -> Result<EvaluationReport> {
    if results.len() != truth_motions.len() {
        return Err(Error::SizeMismatch(results.len(), truth_motions.len()));
    }
    let per_pair: Vec<PairErrorRecord> = results
        .iter()
        .zip(truth_motions)
        .map(|(r, t)| {
            let (rot, trans) = pair_errors(&r.ego_motion, t);
            let mut flagged = r.is_outlier;
            if let Some(threshold) = settings.error_threshold_deg {
                flagged |= rot > threshold;
            }
            PairErrorRecord {
                rotation_error_deg: rot,
                translation_error_m: trans,
                flagged,
            }
        })
        .collect();
    Ok(aggregate(per_pair, settings, config))
}

fn aggregate(
    per_pair: Vec<PairErrorRecord>,
    settings: &EvalSettings,
    config: ReportConfig,
) -> EvaluationReport {
    let pair_count = per_pair.len();
    let flagged = per_pair.iter().filter(|p| p.flagged).count();
    let included: Vec<&PairErrorRecord> = per_pair
        .iter()
        .filter(|p| !(settings.exclude_flagged && p.flagged))
        .collect();
    let denom = included.len().max(1) as f64;
    // index-order pairwise-free summation keeps results deterministic
    let avg_rot = included.iter().map(|p| p.rotation_error_deg).sum::<f64>() / denom;
    let avg_trans = included.iter().map(|p| p.translation_error_m).sum::<f64>() / denom;
    EvaluationReport {
        pair_count,
        avg_rotation_error_deg: if included.is_empty() { 0.0 } else { avg_rot },
        rotation_outlier_fraction: if pair_count == 0 {
            0.0
        } else {
            flagged as f64 / pair_count as f64
        },
        avg_translation_error_m: if included.is_empty() { 0.0 } else { avg_trans },
        expected_discretization_error_m: expected_discretization_error(config.cell_size),
        half_diagonal_bound_m: half_diagonal_bound(config.cell_size),
        per_pair,
        config,
    }
}

/// Evaluate an estimated trajectory against ground-truth poses: consecutive
/// relative motions are compared pairwise. Truth poses are linearly
/// interpolated to the estimate timestamps when they differ by less than
/// `max_dt` seconds.
pub fn evaluate_trajectories<T: Scalar>(
    estimate: &Trajectory<T>,
    truth: &[Pose2D<T>],
    max_dt: f64,
    settings: &EvalSettings,
    config: ReportConfig,
) -> Result<EvaluationReport> {
    if estimate.len() < 2 {
        return Err(Error::InvalidInput("trajectory needs >= 2 poses".into()));
    }
    if truth.len() < 2 {
        return Err(Error::InvalidInput("ground truth needs >= 2 poses".into()));
    }
    let mut per_pair = Vec::with_capacity(estimate.len() - 1);
    for w in 0..estimate.len() - 1 {
        let ea = &estimate.poses[w];
        let eb = &estimate.poses[w + 1];
        let ta = interpolate_pose(truth, ea.timestamp, max_dt)?;
        let tb = interpolate_pose(truth, eb.timestamp, max_dt)?;
        let est = relative_motion(ea, eb);
        let tru = relative_motion(&ta, &tb);
        let (rot, trans) = pair_errors(&est, &tru);
        let mut flagged = estimate.outlier_flags[w + 1];
        if let Some(threshold) = settings.error_threshold_deg {
            flagged |= rot > threshold;
        }
        per_pair.push(PairErrorRecord {
            rotation_error_deg: rot,
            translation_error_m: trans,
            flagged,
        });
    }
    Ok(aggregate(per_pair, settings, config))
}

/// Linear pose interpolation at a timestamp; errors when no ground-truth
/// sample lies within `max_dt`.
pub fn interpolate_pose<T: Scalar>(
    truth: &[Pose2D<T>],
    timestamp: f64,
    max_dt: f64,
) -> Result<Pose2D<T>> {
    let after = truth.partition_point(|p| p.timestamp < timestamp);
    let nearest = |p: &Pose2D<T>| (p.timestamp - timestamp).abs();
    let pick = |p: &Pose2D<T>| -> Result<Pose2D<T>> {
        if nearest(p) <= max_dt {
            Ok(*p)
        } else {
            Err(Error::InvalidInput(format!(
                "no ground truth within {max_dt} s of t={timestamp}"
            )))
        }
    };
    if after == 0 {
        return pick(&truth[0]);
    }
    if after == truth.len() {
        return pick(&truth[truth.len() - 1]);
    }
    let a = &truth[after - 1];
    let b = &truth[after];
    let span = b.timestamp - a.timestamp;
    if span <= 0.0 {
        return pick(a);
    }
    let w = ((timestamp - a.timestamp) / span).clamp(0.0, 1.0);
    let wt = T::cast(w);
    let one = T::one();
    Ok(Pose2D {
        x: (one - wt) * a.x + wt * b.x,
        y: (one - wt) * a.y + wt * b.y,
        heading: normalize_angle(a.heading + wt * normalize_angle(b.heading - a.heading)),
        timestamp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    /// GeoJSON-like planar LineString (x/y in meters, not lon/lat).
    GeoJson,
}

/// CSV columns `timestamp,x,y,heading,outlier`; the GeoJSON-like variant is
/// a planar LineString with per-pose properties.
pub fn export_trajectory<T: Scalar>(
    traj: &Trajectory<T>,
    path: &Path,
    format: TrajectoryFormat,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        TrajectoryFormat::Csv => {
            writeln!(w, "timestamp,x,y,heading,outlier")?;
            for (pose, outlier) in traj.poses.iter().zip(&traj.outlier_flags) {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    pose.timestamp,
                    pose.x.as_f64(),
                    pose.y.as_f64(),
                    pose.heading.as_f64(),
                    u8::from(*outlier)
                )?;
            }
        }
        TrajectoryFormat::GeoJson => {
            let coords: Vec<serde_json::Value> = traj
                .poses
                .iter()
                .map(|p| serde_json::json!([p.x.as_f64(), p.y.as_f64()]))
                .collect();
            let doc = serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": {
                    "crs": "planar-meters",
                    "timestamps": traj.poses.iter().map(|p| p.timestamp).collect::<Vec<_>>(),
                    "headings": traj.poses.iter().map(|p| p.heading.as_f64()).collect::<Vec<_>>(),
                    "outliers": traj.outlier_flags.clone(),
                },
            });
            serde_json::to_writer_pretty(&mut w, &doc)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a trajectory from the CSV written by `export_trajectory`.
pub fn load_trajectory<T: Scalar>(path: &Path) -> Result<Trajectory<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut poses = Vec::new();
    let mut flags = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 {
            if trimmed != "timestamp,x,y,heading,outlier" {
                return Err(Error::ParseLine {
                    line: 1,
                    message: format!("bad header {trimmed:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::ParseLine {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::ParseLine {
                line: line_no,
                message: format!("bad numeric value {s:?}"),
            })
        };
        let timestamp = parse(fields[0])?;
        if let Some(prev) = poses.last() {
            let prev: &Pose2D<T> = prev;
            if timestamp <= prev.timestamp {
                return Err(Error::ParseLine {
                    line: line_no,
                    message: "timestamps not strictly increasing".into(),
                });
            }
        }
        poses.push(Pose2D {
            x: T::cast(parse(fields[1])?),
            y: T::cast(parse(fields[2])?),
            heading: T::cast(parse(fields[3])?),
            timestamp,
        });
        flags.push(match fields[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::ParseLine {
                    line: line_no,
                    message: format!("bad outlier flag {other:?}"),
                })
            }
        });
    }
    Ok(Trajectory {
        poses,
        outlier_flags: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::MotionHypothesis;
    use tempfile::tempdir;

    fn result_with(motion: RigidMotion2D<f64>, outlier: bool) -> RegistrationResult<f64> {
        RegistrationResult {
            ego_motion: motion,
            confidence: if outlier { 1.0 } else { 10.0 },
            is_outlier: outlier,
            hypotheses: vec![MotionHypothesis {
                motion,
                strength: 1.0,
                rank: 1,
            }],
            rotation_confidence: 2.0,
        }
    }

    #[test]
    fn identical_motions_zero_error() {
        let m = RigidMotion2D::new(1.0, 2.0, 0.3);
        assert_eq!(pair_errors(&m, &m), (0.0, 0.0));
    }

    #[test]
    fn full_turn_normalizes_to_zero() {
        let est = RigidMotion2D::new(0.0, 0.0, 0.3 + std::f64::consts::TAU);
        let truth = RigidMotion2D::new(0.0, 0.0, 0.3);
        let (rot, _) = pair_errors(&est, &truth);
        assert!(rot < 1e-9);
    }

    #[test]
    fn diagonal_cell_error_closed_form() {
        let est = RigidMotion2D::new(0.75, 0.75, 0.0);
        let truth = RigidMotion2D::new(0.0, 0.0, 0.0);
        let (_, trans) = pair_errors(&est, &truth);
        assert!((trans - std::f64::consts::SQRT_2 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn rotation_error_bounded_by_half_turn() {
        let est = RigidMotion2D::new(0.0, 0.0, 3.0);
        let truth = RigidMotion2D::new(0.0, 0.0, -3.0);
        let (rot, _) = pair_errors(&est, &truth);
        assert!(rot <= 180.0);
    }

    #[test]
    fn errors_invariant_under_simultaneous_inversion() {
        let est = RigidMotion2D::new(1.0, -2.0, 0.4);
        let truth = RigidMotion2D::new(0.8, -2.2, 0.35);
        let (r1, _) = pair_errors(&est, &truth);
        let (r2, _) = pair_errors(&est.inverse(), &truth.inverse());
        assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn perfect_batch_zero_aggregates() {
        let m = RigidMotion2D::new(1.0, 0.0, 0.1);
        let results = vec![result_with(m, false); 10];
        let truths = vec![m; 10];
        let report = evaluate(
            &results,
            &truths,
            &EvalSettings::default(),
            ReportConfig {
                stride: 5,
                cell_size: 0.75,
                tau: 1.5,
            },
        )
        .unwrap();
        assert_eq!(report.pair_count, 10);
        assert_eq!(report.avg_rotation_error_deg, 0.0);
        assert_eq!(report.rotation_outlier_fraction, 0.0);
        assert_eq!(report.avg_translation_error_m, 0.0);
    }

    #[test]
    fn one_flagged_in_hundred_excluded_from_average() {
        let good = RigidMotion2D::new(1.0, 0.0, 0.0);
        let truth = good;
        let mut results = vec![result_with(good, false); 99];
        // the flagged pair has a huge error that must not pollute the average
        results.push(result_with(RigidMotion2D::new(50.0, 0.0, 1.0), true));
        let truths = vec![truth; 100];
        let report = evaluate(
            &results,
            &truths,
            &EvalSettings::default(),
            ReportConfig {
                stride: 5,
                cell_size: 0.75,
                tau: 1.5,
            },
        )
        .unwrap();
        assert!((report.rotation_outlier_fraction - 0.01).abs() < 1e-12);
        assert_eq!(report.avg_rotation_error_deg, 0.0);
        assert_eq!(report.avg_translation_error_m, 0.0);
    }

    #[test]
    fn permutation_consistency() {
        let mut results = Vec::new();
        let mut truths = Vec::new();
        for i in 0..20 {
            let m = RigidMotion2D::new(i as f64 * 0.1, 0.0, 0.01 * i as f64);
            results.push(result_with(m, i % 7 == 0));
            truths.push(RigidMotion2D::new(0.0, 0.0, 0.0));
        }
        let cfg = ReportConfig {
            stride: 5,
            cell_size: 0.75,
            tau: 1.5,
        };
        let r1 = evaluate(&results, &truths, &EvalSettings::default(), cfg.clone()).unwrap();
        // rotate the pairing
        let mut results2 = results.clone();
        results2.rotate_left(7);
        let mut truths2 = truths.clone();
        truths2.rotate_left(7);
        let r2 = evaluate(&results2, &truths2, &EvalSettings::default(), cfg).unwrap();
        assert!((r1.avg_rotation_error_deg - r2.avg_rotation_error_deg).abs() < 1e-9);
        assert!((r1.avg_translation_error_m - r2.avg_translation_error_m).abs() < 1e-9);
        assert_eq!(r1.rotation_outlier_fraction, r2.rotation_outlier_fraction);
    }

    #[test]
    fn length_mismatch_rejected() {
        let m = RigidMotion2D::new(0.0, 0.0, 0.0);
        assert!(evaluate(
            &[result_with(m, false)],
            &[],
            &EvalSettings::default(),
            ReportConfig {
                stride: 5,
                cell_size: 0.75,
                tau: 1.5
            }
        )
        .is_err());
    }

    #[test]
    fn discretization_constants() {
        // Monte-Carlo oracle for E[norm(U1, U2)], U ~ Uniform(-1/2, 1/2)
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 2_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..n {
            let u1: f64 = rng.gen::<f64>() - 0.5;
            let u2: f64 = rng.gen::<f64>() - 0.5;
            acc += (u1 * u1 + u2 * u2).sqrt();
        }
        let mc = acc / n as f64;
        let analytic = expected_discretization_error(1.0);
        assert!((mc - analytic).abs() < 1e-3, "mc {mc} vs analytic {analytic}");
        assert!((half_diagonal_bound(0.75) - 0.5303300858899107).abs() < 1e-12);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = Trajectory::<f64> {
            poses: (0..5)
                .map(|i| Pose2D {
                    x: i as f64,
                    y: -(i as f64) * 0.5,
                    heading: 0.1 * i as f64,
                    timestamp: i as f64 * 0.25,
                })
                .collect(),
            outlier_flags: vec![false, false, true, false, false],
        };
        export_trajectory(&traj, &path, TrajectoryFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(3).unwrap().ends_with(",1"));
        let loaded = load_trajectory::<f64>(&path).unwrap();
        assert_eq!(loaded, traj);
    }

    #[test]
    fn geojson_export_is_valid_json() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.json");
        let traj = Trajectory::<f64> {
            poses: vec![
                Pose2D {
                    x: 0.0,
                    y: 0.0,
                    heading: 0.0,
                    timestamp: 0.0,
                },
                Pose2D {
                    x: 1.0,
                    y: 1.0,
                    heading: 0.0,
                    timestamp: 1.0,
                },
            ],
            outlier_flags: vec![false, false],
        };
        export_trajectory(&traj, &path, TrajectoryFormat::GeoJson).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(doc["geometry"]["type"], "LineString");
    }

    #[test]
    fn interpolation_between_truth_samples() {
        let truth = vec![
            Pose2D::<f64> {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                timestamp: 0.0,
            },
            Pose2D {
                x: 2.0,
                y: 4.0,
                heading: 0.2,
                timestamp: 1.0,
            },
        ];
        let p = interpolate_pose(&truth, 0.5, 0.1).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12);
        assert!((p.y - 2.0).abs() < 1e-12);
        assert!((p.heading - 0.1).abs() < 1e-12);
    }
}
