//! Synthetic scene generator: ray-casts simple shapes into polar sweeps,
//! applies sensor ego-motion and per-object motions, and injects the noise
//! classes seen on real scanning radar (gaussian intensity noise,
//! salt-and-pepper, ghost beams). Deterministic under the spec seed; the
//! generated ground truth is exact by construction and serves as the oracle
//! for registration tolerances.

use crate::error::{Error, Result};
use crate::grid::PolarScan;
use crate::odometry::{compose, Pose2D, Trajectory};
use crate::registration::RigidMotion2D;
use crate::scalar::Scalar;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Point {
        x: f64,
        y: f64,
    },
    Wall {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },
    Block {
        cx: f64,
        cy: f64,
        width: f64,
        height: f64,
        #[serde(default)]
        angle: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticTarget {
    pub shape: Shape,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingObject {
    pub shape: Shape,
    pub reflectivity: f64,
    /// World-frame rigid motion applied every frame.
    pub motion_dx: f64,
    pub motion_dy: f64,
    #[serde(default)]
    pub motion_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Fraction of polar bins corrupted, in [0, 1].
    pub salt_pepper_density: f64,
    pub ghost_beam_count: usize,
    pub intensity_noise_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            salt_pepper_density: 0.0,
            ghost_beam_count: 0,
            intensity_noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub max_range: f64,
    pub azimuth_count: usize,
    pub range_resolution: f64,
    /// Seconds between frames.
    pub frame_period: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            max_range: 96.0,
            azimuth_count: 400,
            range_resolution: 0.25,
            frame_period: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub static_targets: Vec<StaticTarget>,
    pub moving_objects: Vec<MovingObject>,
    pub noise: NoiseSpec,
    pub sensor: SensorSpec,
    /// Sensor motion per frame, in the sensor frame.
    pub ego_dx: f64,
    pub ego_dy: f64,
    pub ego_theta: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            static_targets: Vec::new(),
            moving_objects: Vec::new(),
            noise: NoiseSpec::default(),
            sensor: SensorSpec::default(),
            ego_dx: 0.0,
            ego_dy: 0.0,
            ego_theta: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.salt_pepper_density) {
            return Err(Error::InvalidInput(
                "salt_pepper_density must be in [0, 1]".into(),
            ));
        }
        if n.intensity_noise_sigma < 0.0 {
            return Err(Error::InvalidInput(
                "intensity_noise_sigma must be >= 0".into(),
            ));
        }
        if self.sensor.max_range <= 0.0
            || self.sensor.range_resolution <= 0.0
            || self.sensor.azimuth_count < 4
            || self.sensor.frame_period <= 0.0
        {
            return Err(Error::InvalidInput("invalid sensor geometry".into()));
        }
        for t in &self.static_targets {
            if !(0.0..=1.0).contains(&t.reflectivity) {
                return Err(Error::InvalidInput("reflectivity must be in [0, 1]".into()));
            }
        }
        for o in &self.moving_objects {
            if !(0.0..=1.0).contains(&o.reflectivity) {
                return Err(Error::InvalidInput("reflectivity must be in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn ego_motion<T: Scalar>(&self) -> RigidMotion2D<T> {
        RigidMotion2D::new(
            T::cast(self.ego_dx),
            T::cast(self.ego_dy),
            T::cast(self.ego_theta),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub scans: Vec<PolarScan<T>>,
    /// Exact sensor trajectory; the registration oracle.
    pub trajectory: Trajectory<T>,
    /// Per object, the world-frame motion applied at each frame step.
    pub object_motions: Vec<Vec<RigidMotion2D<T>>>,
    pub warnings: Vec<String>,
}

/// Sample surface points of a shape, roughly every half range bin.
fn surface_points(shape: &Shape, spacing: f64) -> Vec<(f64, f64)> {
    let segment = |x1: f64, y1: f64, x2: f64, y2: f64, out: &mut Vec<(f64, f64)>| {
        let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            out.push((x1 + t * (x2 - x1), y1 + t * (y2 - y1)));
        }
    };
    let mut pts = Vec::new();
    match *shape {
        Shape::Point { x, y } => pts.push((x, y)),
        Shape::Wall { x1, y1, x2, y2 } => segment(x1, y1, x2, y2, &mut pts),
        Shape::Block {
            cx,
            cy,
            width,
            height,
            angle,
        } => {
            let (s, c) = angle.sin_cos();
            let corner = |dx: f64, dy: f64| (cx + c * dx - s * dy, cy + s * dx + c * dy);
            let w = width / 2.0;
            let h = height / 2.0;
            let corners = [
                corner(-w, -h),
                corner(w, -h),
                corner(w, h),
                corner(-w, h),
            ];
            for k in 0..4 {
                let (x1, y1) = corners[k];
                let (x2, y2) = corners[(k + 1) % 4];
                segment(x1, y1, x2, y2, &mut pts);
            }
        }
    }
    pts
}

/// Apply an accumulated world-frame transform to a point.
fn apply_motion(m: &RigidMotion2D<f64>, p: (f64, f64)) -> (f64, f64) {
    let (s, c) = m.theta.sin_cos();
    (m.dx + c * p.0 - s * p.1, m.dy + s * p.0 + c * p.1)
}

/// Generate `frame_count` polar sweeps of the scene.
pub fn synth_scene<T: Scalar>(spec: &SceneSpec, frame_count: usize) -> Result<SynthOutput<T>> {
    spec.validate()?;
    if frame_count < 1 {
        return Err(Error::InvalidInput("frame_count must be >= 1".into()));
    }
    let sensor = &spec.sensor;
    let ac = sensor.azimuth_count;
    let rbc = ((sensor.max_range / sensor.range_resolution).round() as usize).max(2);
    let az_step = std::f64::consts::TAU / ac as f64;
    let spacing = sensor.range_resolution * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let ego: RigidMotion2D<f64> = RigidMotion2D::new(spec.ego_dx, spec.ego_dy, spec.ego_theta);
    let mut sensor_pose = Pose2D::<f64>::origin();
    let mut object_transforms: Vec<RigidMotion2D<f64>> =
        vec![RigidMotion2D::identity(); spec.moving_objects.len()];

    let static_points: Vec<(Vec<(f64, f64)>, f64)> = spec
        .static_targets
        .iter()
        .map(|t| (surface_points(&t.shape, spacing), t.reflectivity))
        .collect();
    let object_points: Vec<(Vec<(f64, f64)>, f64)> = spec
        .moving_objects
        .iter()
        .map(|o| (surface_points(&o.shape, spacing), o.reflectivity))
        .collect();

    let mut scans = Vec::with_capacity(frame_count);
    let mut poses = Vec::with_capacity(frame_count);
    let mut warnings = Vec::new();

    for frame in 0..frame_count {
        if frame > 0 {
            sensor_pose = compose(&sensor_pose, &ego);
            for (k, obj) in spec.moving_objects.iter().enumerate() {
                let m = RigidMotion2D::new(obj.motion_dx, obj.motion_dy, obj.motion_theta);
                // world-frame accumulation: new = step o previous
                object_transforms[k] = m.compose(&object_transforms[k]);
            }
        }
        sensor_pose.timestamp = frame as f64 * sensor.frame_period;
        poses.push(sensor_pose);

        let mut intensities = vec![0.0f64; ac * rbc];
        let (sh, ch) = sensor_pose.heading.sin_cos();
        let mut splat = |q: (f64, f64), reflectivity: f64, visible: &mut bool| {
            let dx = q.0 - sensor_pose.x;
            let dy = q.1 - sensor_pose.y;
            // world -> sensor frame
            let px = ch * dx + sh * dy;
            let py = -sh * dx + ch * dy;
            let r = (px * px + py * py).sqrt();
            let rf = r / sensor.range_resolution;
            if rf >= (rbc - 1) as f64 {
                return;
            }
            *visible = true;
            let mut az = py.atan2(px);
            if az < 0.0 {
                az += std::f64::consts::TAU;
            }
            // bilinear splat over the four surrounding bins; nearest-bin
            // splatting leaves sub-bin jitter that decorrelates frames
            let af = az / az_step;
            let a0 = af.floor();
            let r0 = rf.floor();
            let (wa, wr) = (af - a0, rf - r0);
            for (da, aw) in [(0usize, 1.0 - wa), (1, wa)] {
                for (dr, rw) in [(0usize, 1.0 - wr), (1, wr)] {
                    let ai = (a0 as usize + da) % ac;
                    let rb = r0 as usize + dr;
                    let cell = &mut intensities[ai * rbc + rb];
                    let v = reflectivity * aw * rw;
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        };

        let mut visible = true;
        for (points, reflectivity) in &static_points {
            for &p in points {
                splat(p, *reflectivity, &mut visible);
            }
        }
        for (k, (points, reflectivity)) in object_points.iter().enumerate() {
            let mut obj_visible = false;
            for &p in points {
                let q = apply_motion(&object_transforms[k], p);
                splat(q, *reflectivity, &mut obj_visible);
            }
            if frame == 0 && !obj_visible {
                warnings.push(format!("moving object {k} is outside max_range at frame 0"));
            }
        }

        // noise, in a fixed order for determinism
        if spec.noise.intensity_noise_sigma > 0.0 {
            for v in &mut intensities {
                let n: f64 = rng.sample(rand_distr_normal());
                *v = (*v + spec.noise.intensity_noise_sigma * n).max(0.0);
            }
        }
        if spec.noise.salt_pepper_density > 0.0 {
            for v in &mut intensities {
                if rng.gen::<f64>() < spec.noise.salt_pepper_density {
                    *v = if rng.gen::<bool>() { 1.0 } else { 0.0 };
                }
            }
        }
        for _ in 0..spec.noise.ghost_beam_count {
            let ai = rng.gen_range(0..ac);
            for v in &mut intensities[ai * rbc..(ai + 1) * rbc] {
                *v = 1.0;
            }
        }

        scans.push(PolarScan {
            azimuth_count: ac,
            range_bin_count: rbc,
            range_resolution: T::cast(sensor.range_resolution),
            azimuth_angles: (0..ac).map(|i| T::cast(i as f64 * az_step)).collect(),
            intensities: intensities.into_iter().map(T::cast).collect(),
            timestamp: sensor_pose.timestamp,
        });
    }

    let trajectory = Trajectory {
        outlier_flags: vec![false; poses.len()],
        poses: poses
            .into_iter()
            .map(|p| Pose2D {
                x: T::cast(p.x),
                y: T::cast(p.y),
                heading: T::cast(p.heading),
                timestamp: p.timestamp,
            })
            .collect(),
    };
    let object_motions = spec
        .moving_objects
        .iter()
        .map(|o| {
            (0..frame_count.saturating_sub(1))
                .map(|_| {
                    RigidMotion2D::new(
                        T::cast(o.motion_dx),
                        T::cast(o.motion_dy),
                        T::cast(o.motion_theta),
                    )
                })
                .collect()
        })
        .collect();
    Ok(SynthOutput {
        scans,
        trajectory,
        object_motions,
        warnings,
    })
}

/// Standard normal via Box-Muller on the uniform stream; avoids pulling in a
/// distributions crate for one sampler.
struct BoxMuller;

fn rand_distr_normal() -> BoxMuller {
    BoxMuller
}

impl rand::distributions::Distribution<f64> for BoxMuller {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
