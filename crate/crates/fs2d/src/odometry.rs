//! Chaining of pairwise registrations into an SE(2) trajectory.
//!
//! No loop closure and no global optimization: the trajectory is a plain
//! sequential fold of relative motions. Outlier-flagged registrations stay in
//! the chain and are marked; an optional constant-velocity hold replaces them.

use crate::error::{Error, Result};
use crate::grid::PolarScan;
use crate::registration::{register_with_plan, RegistrationConfig, RegistrationResult, RigidMotion2D};
use crate::rotation::{normalize_angle, ShtPlan};
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Planar pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    /// Radians in (-pi, pi].
    pub heading: T,
    /// Seconds.
    pub timestamp: f64,
}

impl<T: Scalar> Pose2D<T> {
    pub fn origin() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            heading: T::zero(),
            timestamp: 0.0,
        }
    }
}

/// Chained poses with per-pose outlier flags; timestamps strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub poses: Vec<Pose2D<T>>,
    pub outlier_flags: Vec<bool>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// SE(2) group action: apply a relative motion in the frame of `p`.
pub fn compose<T: Scalar>(p: &Pose2D<T>, m: &RigidMotion2D<T>) -> Pose2D<T> {
    let (s, c) = p.heading.sin_cos();
    Pose2D {
        x: p.x + c * m.dx - s * m.dy,
        y: p.y + s * m.dx + c * m.dy,
        heading: normalize_angle(p.heading + m.theta),
        timestamp: p.timestamp,
    }
}

/// Group inverse: m composed with invert(m) is the identity.
pub fn invert<T: Scalar>(m: &RigidMotion2D<T>) -> RigidMotion2D<T> {
    m.inverse()
}

/// Relative motion taking pose `a` to pose `b`, expressed in the frame of `a`.
pub fn relative_motion<T: Scalar>(a: &Pose2D<T>, b: &Pose2D<T>) -> RigidMotion2D<T> {
    let (s, c) = a.heading.sin_cos();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    RigidMotion2D::new(
        c * dx + s * dy,
        -s * dx + c * dy,
        normalize_angle(b.heading - a.heading),
    )
}

/// Pair scheduling: the default registers scan i with i+stride for
/// i = 0, stride, 2*stride, ...; dense mode advances i by 1 instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrideMode {
    #[default]
    Strided,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct OdometryConfig<T> {
    pub registration: RegistrationConfig<T>,
    pub stride: usize,
    pub mode: StrideMode,
    /// Replace outlier-flagged motions with the previous motion.
    pub hold_on_outlier: bool,
    /// Worker threads for pair registration; 1 = sequential.
    pub jobs: usize,
}

impl<T: Scalar> Default for OdometryConfig<T> {
    fn default() -> Self {
        Self {
            registration: RegistrationConfig::default(),
            stride: 5,
            mode: StrideMode::Strided,
            hold_on_outlier: false,
            jobs: 1,
        }
    }
}

/// Register the scheduled pairs. Results are gathered in input order
/// regardless of worker count.
pub fn register_pairs<T: Scalar>(
    scans: &[PolarScan<T>],
    cfg: &OdometryConfig<T>,
) -> Result<Vec<RegistrationResult<T>>> {
    if cfg.stride == 0 {
        return Err(Error::InvalidInput("stride must be >= 1".into()));
    }
    if scans.len() < cfg.stride + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least stride + 1 = {} scans, got {}",
            cfg.stride + 1,
            scans.len()
        )));
    }
    let step = match cfg.mode {
        StrideMode::Strided => cfg.stride,
        StrideMode::Dense => 1,
    };
    let pairs: Vec<usize> = (0..)
        .map(|k| k * step)
        .take_while(|i| i + cfg.stride < scans.len())
        .collect();
    let plan = ShtPlan::new(cfg.registration.bandwidth);

    let run = |i: usize| -> Result<RegistrationResult<T>> {
        register_with_plan(&scans[i], &scans[i + cfg.stride], &cfg.registration, &plan).map_err(
            |e| Error::PairFailed {
                pair_index: i,
                source: Box::new(e),
            },
        )
    };

    if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        pool.install(|| {
            pairs
                .par_iter()
                .map(|&i| run(i))
                .collect::<Result<Vec<_>>>()
        })
    } else {
        pairs.iter().map(|&i| run(i)).collect()
    }
}

/// Fold relative motions from `origin` into a trajectory. The ordered,
/// sequential fold keeps floating-point results independent of how the
/// motions were produced.
pub fn chain_motions<T: Scalar>(
    origin: Pose2D<T>,
    motions: &[(RigidMotion2D<T>, bool, f64)],
) -> Trajectory<T> {
    let mut poses = Vec::with_capacity(motions.len() + 1);
    let mut flags = Vec::with_capacity(motions.len() + 1);
    poses.push(origin);
    flags.push(false);
    let mut current = origin;
    for (motion, outlier, timestamp) in motions {
        current = compose(&current, motion);
        current.timestamp = *timestamp;
        poses.push(current);
        flags.push(*outlier);
    }
    Trajectory {
        poses,
        outlier_flags: flags,
    }
}

/// Full odometry: register scheduled pairs, then chain.
pub fn run_odometry<T: Scalar>(
    scans: &[PolarScan<T>],
    origin: Pose2D<T>,
    cfg: &OdometryConfig<T>,
) -> Result<(Trajectory<T>, Vec<RegistrationResult<T>>)> {
    let results = register_pairs(scans, cfg)?;
    let step = match cfg.mode {
        StrideMode::Strided => cfg.stride,
        StrideMode::Dense => 1,
    };
    let mut motions = Vec::with_capacity(results.len());
    let mut last_good: Option<RigidMotion2D<T>> = None;
    for (k, r) in results.iter().enumerate() {
        let ts = scans[k * step + cfg.stride].timestamp;
        let motion = if r.is_outlier && cfg.hold_on_outlier {
            last_good.unwrap_or(r.ego_motion)
        } else {
            r.ego_motion
        };
        if !r.is_outlier {
            last_good = Some(r.ego_motion);
        }
        motions.push((motion, r.is_outlier, ts));
    }
    let mut origin = origin;
    origin.timestamp = scans[0].timestamp;
    Ok((chain_motions(origin, &motions), results))
}
