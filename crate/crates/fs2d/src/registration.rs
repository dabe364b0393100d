//! Full pairwise registration: rotation estimation, pi-disambiguation,
//! translation by phase correlation, multi-peak motion hypotheses, confidence
//! scoring, outlier flagging.

use crate::error::{Error, Result};
use crate::grid::{polar_to_cartesian, preprocess, CartesianGrid, GridConfig, PolarScan};
use crate::rotation::{estimate_rotation_with_plan, normalize_angle, ShtPlan};
use crate::scalar::Scalar;
use crate::spectral::{correlate_spectra, dft2, magnitude, CorrelationSurface};
use serde::{Deserialize, Serialize};

/// Planar rigid motion; theta normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion2D<T> {
    pub dx: T,
    pub dy: T,
    pub theta: T,
}

impl<T: Scalar> RigidMotion2D<T> {
    pub fn new(dx: T, dy: T, theta: T) -> Self {
        Self {
            dx,
            dy,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            theta: T::zero(),
        }
    }

    /// Group composition: apply `self`, then `other` in the rotated frame.
    pub fn compose(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.dx + c * other.dx - s * other.dy,
            self.dy + s * other.dx + c * other.dy,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            -(c * self.dx + s * self.dy),
            -(-s * self.dx + c * self.dy),
            -self.theta,
        )
    }

    pub fn translation_norm(&self) -> T {
        (self.dx * self.dx + self.dy * self.dy).sqrt()
    }
}

/// One correlation peak read as a candidate rigid motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionHypothesis<T> {
    pub motion: RigidMotion2D<T>,
    /// Correlation peak value.
    pub strength: T,
    /// 1-based, by strength descending.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult<T> {
    /// The rank-1 hypothesis; the static background is assumed to dominate.
    pub ego_motion: RigidMotion2D<T>,
    /// Peak-to-second-peak ratio of the translation surface, >= 1.
    pub confidence: T,
    pub is_outlier: bool,
    /// Ego first, then secondary peaks.
    pub hypotheses: Vec<MotionHypothesis<T>>,
    /// Peak-to-second-peak ratio of the rotation profile, >= 1.
    pub rotation_confidence: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct RegistrationConfig<T> {
    pub grid: GridConfig<T>,
    /// Spherical-harmonic bandwidth for rotation estimation.
    pub bandwidth: usize,
    /// Outlier threshold on the translation confidence ratio.
    pub tau: T,
    /// Maximum number of motion hypotheses.
    pub nms_k: usize,
    /// Chebyshev suppression radius, cells.
    pub nms_radius: usize,
    /// Peaks below this fraction of the strongest are dropped.
    pub rel_threshold: T,
    /// Quadratic sub-cell refinement of translation peaks.
    pub subcell: bool,
    /// Polar-domain ghost-beam and salt removal before gridding.
    pub despeckle: bool,
}

impl<T: Scalar> Default for RegistrationConfig<T> {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            bandwidth: 128,
            tau: T::cast(1.5),
            nms_k: 5,
            nms_radius: 3,
            rel_threshold: T::cast(0.3),
            subcell: false,
            despeckle: true,
        }
    }
}

impl<T: Scalar> RegistrationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.nms_k < 1 {
            return Err(Error::InvalidInput("nms_k must be >= 1".into()));
        }
        if self.nms_radius < 1 {
            return Err(Error::InvalidInput("nms_radius must be >= 1".into()));
        }
        if !(self.rel_threshold > T::zero() && self.rel_threshold <= T::one()) {
            return Err(Error::InvalidInput("rel_threshold must be in (0, 1]".into()));
        }
        if !(self.tau >= T::one()) {
            return Err(Error::InvalidInput("tau must be >= 1".into()));
        }
        Ok(())
    }
}

/// Greedy non-maximum suppression over a correlation surface. Returns up to
/// `k` peaks ordered by strength descending; stops early when the next
/// maximum falls below `rel_threshold` times the first.
pub fn extract_peaks<T: Scalar>(
    surface: &CorrelationSurface<T>,
    k: usize,
    nms_radius: usize,
    rel_threshold: T,
) -> Vec<((isize, isize), T)> {
    let n = surface.size;
    let mut suppressed = vec![false; n * n];
    let mut peaks = Vec::new();
    let mut first_strength = T::zero();
    for _ in 0..k {
        let mut best = T::neg_infinity();
        let mut best_idx = None;
        for (idx, &v) in surface.values.iter().enumerate() {
            if !suppressed[idx] && v > best {
                best = v;
                best_idx = Some(idx);
            }
        }
        let Some(idx) = best_idx else { break };
        if !(best > T::zero()) {
            break;
        }
        if peaks.is_empty() {
            first_strength = best;
        } else if best < rel_threshold * first_strength {
            break;
        }
        let pi = idx / n;
        let pj = idx % n;
        peaks.push(((surface.wrap(pi), surface.wrap(pj)), best));
        let r = nms_radius as isize;
        for di in -r..=r {
            for dj in -r..=r {
                let i = (pi as isize + di).rem_euclid(n as isize) as usize;
                let j = (pj as isize + dj).rem_euclid(n as isize) as usize;
                suppressed[i * n + j] = true;
            }
        }
    }
    peaks
}

/// Ratio of the strongest peak to the strongest value outside its
/// neighborhood. Returns 1 for flat or all-zero surfaces; clamped to 1e6
/// when no meaningful second peak exists.
pub fn confidence_score<T: Scalar>(surface: &CorrelationSurface<T>, nms_radius: usize) -> T {
    let n = surface.size;
    let mut best = T::neg_infinity();
    let mut best_idx = 0usize;
    for (idx, &v) in surface.values.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = idx;
        }
    }
    if !(best > T::zero()) {
        return T::one();
    }
    let pi = (best_idx / n) as isize;
    let pj = (best_idx % n) as isize;
    let r = nms_radius as isize;
    let mut second = T::neg_infinity();
    for (idx, &v) in surface.values.iter().enumerate() {
        let i = (idx / n) as isize;
        let j = (idx % n) as isize;
        let di = (i - pi).rem_euclid(n as isize);
        let di = di.min(n as isize - di);
        let dj = (j - pj).rem_euclid(n as isize);
        let dj = dj.min(n as isize - dj);
        if di.max(dj) > r && v > second {
            second = v;
        }
    }
    let cap = T::cast(1e6);
    if !(second > T::zero()) {
        return cap;
    }
    (best / second).max(T::one()).min(cap)
}

/// Separable quadratic refinement of a peak; returns the fractional shift.
/// Peaks on the surface border are returned unchanged. The offset is bounded
/// by +-0.5 cell per axis.
pub fn refine_subcell<T: Scalar>(
    surface: &CorrelationSurface<T>,
    peak: (isize, isize),
) -> (T, T) {
    let n = surface.size as isize;
    let (si, sj) = peak;
    let int = (T::cast(si as f64), T::cast(sj as f64));
    // border in wrapped-shift space: the surface is cyclic, so every peak has
    // neighbors; "border" means the shift sits at the wrap boundary -n/2
    if si == -n / 2 || sj == -n / 2 {
        return int;
    }
    let idx = |i: isize, j: isize| -> T {
        let r = i.rem_euclid(n) as usize;
        let c = j.rem_euclid(n) as usize;
        surface.values[r * surface.size + c]
    };
    let vertex = |lo: T, mid: T, hi: T| -> T {
        let denom = T::cast(2.0) * (T::cast(2.0) * mid - lo - hi);
        if denom > T::zero() {
            ((hi - lo) / denom).max(-T::cast(0.5)).min(T::cast(0.5))
        } else {
            T::zero()
        }
    };
    let di = vertex(idx(si - 1, sj), idx(si, sj), idx(si + 1, sj));
    let dj = vertex(idx(si, sj - 1), idx(si, sj), idx(si, sj + 1));
    (int.0 + di, int.1 + dj)
}

/// Separable cyclic [1, 2, 1]/4 smoothing of a correlation surface.
fn smooth_surface<T: Scalar>(surface: &CorrelationSurface<T>) -> CorrelationSurface<T> {
    let n = surface.size;
    let quarter = T::cast(0.25);
    let half = T::cast(0.5);
    let mut rows = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            rows[i * n + j] = quarter * surface.values[i * n + (j + n - 1) % n]
                + half * surface.values[i * n + j]
                + quarter * surface.values[i * n + (j + 1) % n];
        }
    }
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = quarter * rows[((i + n - 1) % n) * n + j]
                + half * rows[i * n + j]
                + quarter * rows[((i + 1) % n) * n + j];
        }
    }
    CorrelationSurface { size: n, values: out }
}

/// Geometry compatibility check for a scan pair.
fn check_geometry<T: Scalar>(a: &PolarScan<T>, b: &PolarScan<T>) -> Result<()> {
    if a.azimuth_count != b.azimuth_count || a.range_bin_count != b.range_bin_count {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} vs {}x{}",
            a.azimuth_count, a.range_bin_count, b.azimuth_count, b.range_bin_count
        )));
    }
    let rel = ((a.range_resolution - b.range_resolution) / a.range_resolution).abs();
    if rel > T::cast(1e-9) {
        return Err(Error::GeometryMismatch("range_resolution differs".into()));
    }
    Ok(())
}

/// Register two preprocessed Cartesian grids. Exposed for synthetic tests
/// that bypass the polar stage.
pub fn register_grids<T: Scalar>(
    grid_a: &CartesianGrid<T>,
    grid_b: &CartesianGrid<T>,
    cfg: &RegistrationConfig<T>,
) -> Result<RegistrationResult<T>> {
    register_grids_with_plan(grid_a, grid_b, cfg, &ShtPlan::new(cfg.bandwidth))
}

/// As `register_grids` with a caller-owned transform plan (shareable across
/// pairs and threads).
pub fn register_grids_with_plan<T: Scalar>(
    grid_a: &CartesianGrid<T>,
    grid_b: &CartesianGrid<T>,
    cfg: &RegistrationConfig<T>,
    plan: &ShtPlan<T>,
) -> Result<RegistrationResult<T>> {
    cfg.validate()?;
    if grid_a.size != grid_b.size {
        return Err(Error::SizeMismatch(grid_a.size, grid_b.size));
    }
    let spec_a = dft2(grid_a);
    let mag_a = magnitude(&spec_a);
    let mag_b = magnitude(&dft2(grid_b));
    // a structureless pair should come back flagged, not fail the batch:
    // fall back to a zero-rotation candidate with floor confidence
    let rot = match estimate_rotation_with_plan(&mag_a, &mag_b, plan) {
        Ok(rot) => rot,
        Err(Error::NoStructure) => crate::rotation::RotationEstimate {
            angle_mod_pi: T::zero(),
            candidates: (T::zero(), T::PI()),
            correlation_profile: Vec::new(),
            confidence: T::one(),
        },
        Err(e) => return Err(e),
    };

    // The image of scan B appears rotated by -psi when the sensor heading
    // changed by +psi, so the heading candidates are the negated spectral
    // candidates. Each is tried: derotate grid B, phase-correlate, keep the
    // stronger translation peak.
    let cell = grid_a.cell_size;
    let mut best: Option<(T, CorrelationSurface<T>, T)> = None;
    for cand in [rot.candidates.0, rot.candidates.1] {
        let psi = normalize_angle(-cand);
        let derotated = grid_b.rotated(psi);
        let surface = correlate_spectra(&spec_a, &dft2(&derotated))?;
        let (_, _, peak) = surface.peak();
        match &best {
            Some((_, _, b)) if !(peak > *b) => {}
            _ => best = Some((psi, surface, peak)),
        }
    }
    let (psi, surface, peak_value) = best.expect("two candidates evaluated");

    let confidence = confidence_score(&surface, cfg.nms_radius);
    if !(peak_value > T::zero()) {
        // flat translation surface: flag rather than fail
        let ego = RigidMotion2D::new(T::zero(), T::zero(), psi);
        return Ok(RegistrationResult {
            ego_motion: ego,
            confidence: T::one(),
            is_outlier: true,
            hypotheses: vec![MotionHypothesis {
                motion: ego,
                strength: T::min_positive_value(),
                rank: 1,
            }],
            rotation_confidence: rot.confidence,
        });
    }

    let peaks = extract_peaks(&surface, cfg.nms_k, cfg.nms_radius, cfg.rel_threshold);
    // the whitened peak is near-Dirichlet; the 3-point parabola is biased on
    // it, so the refinement reads a 1-2-1 smoothed copy (peak found on raw)
    let smoothed = if cfg.subcell {
        Some(smooth_surface(&surface))
    } else {
        None
    };
    let mut hypotheses = Vec::with_capacity(peaks.len());
    for (rank, ((si, sj), strength)) in peaks.iter().enumerate() {
        let (fi, fj) = if let Some(sm) = &smoothed {
            refine_subcell(sm, (*si, *sj))
        } else {
            (T::cast(*si as f64), T::cast(*sj as f64))
        };
        // surface peak (rows, cols) = apparent shift of the derotated scan B;
        // the sensor translation in the frame of scan A is its negation
        let motion = RigidMotion2D::new(-fj * cell, -fi * cell, psi);
        hypotheses.push(MotionHypothesis {
            motion,
            strength: *strength,
            rank: rank + 1,
        });
    }
    let ego_motion = hypotheses[0].motion;
    Ok(RegistrationResult {
        ego_motion,
        confidence,
        is_outlier: confidence < cfg.tau,
        hypotheses,
        rotation_confidence: rot.confidence,
    })
}

/// Full pipeline from raw polar scans.
pub fn register<T: Scalar>(
    scan_a: &PolarScan<T>,
    scan_b: &PolarScan<T>,
    cfg: &RegistrationConfig<T>,
) -> Result<RegistrationResult<T>> {
    register_with_plan(scan_a, scan_b, cfg, &ShtPlan::new(cfg.bandwidth))
}

pub fn register_with_plan<T: Scalar>(
    scan_a: &PolarScan<T>,
    scan_b: &PolarScan<T>,
    cfg: &RegistrationConfig<T>,
    plan: &ShtPlan<T>,
) -> Result<RegistrationResult<T>> {
    check_geometry(scan_a, scan_b)?;
    let grid_of = |scan: &PolarScan<T>| -> Result<CartesianGrid<T>> {
        let cleaned;
        let scan = if cfg.despeckle {
            cleaned = crate::grid::despeckle(scan);
            &cleaned
        } else {
            scan
        };
        Ok(preprocess(&polar_to_cartesian(scan, &cfg.grid)?, &cfg.grid))
    };
    let ga = grid_of(scan_a)?;
    let gb = grid_of(scan_b)?;
    register_grids_with_plan(&ga, &gb, cfg, plan)
}
