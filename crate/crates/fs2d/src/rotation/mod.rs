//! In-plane rotation estimation from spectral magnitudes.
//!
//! The magnitude spectrum is projected onto the sphere (rotation in the image
//! plane becomes rotation about the polar axis), transformed into spherical
//! harmonics, and correlated over z-axis rotations. Because magnitudes of
//! real images are point-symmetric the estimate is defined mod pi; both
//! candidates are returned and disambiguated at the translation stage.
//!
//! A polar-resampling circular-correlation estimator is provided as an
//! independent baseline for the harmonic path.

pub mod sht;

pub use sht::{ShCoefficients, ShtPlan, SphericalFunction};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::SpectralMagnitude;
use num_complex::Complex;
use rustfft::FftPlanner;

/// Upsampling factor for the internal correlation profile; the public profile
/// stays on the 2B-point grid.
const PROFILE_UPSAMPLE: usize = 8;

/// Rotation estimate, defined modulo pi.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationEstimate<T> {
    /// Radians in [0, pi).
    pub angle_mod_pi: T,
    /// The pair {theta, theta + pi}, both normalized to (-pi, pi].
    pub candidates: (T, T),
    /// Correlation values over the sampled rotation angles.
    pub correlation_profile: Vec<T>,
    /// Peak-to-second-peak ratio, >= 1.
    pub confidence: T,
}

pub fn normalize_angle<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    let tau = pi + pi;
    let mut a = a % tau;
    if a > pi {
        a = a - tau;
    } else if a <= -pi {
        a = a + tau;
    }
    a
}

fn bilinear_mag<T: Scalar>(mag: &SpectralMagnitude<T>, row: T, col: T) -> T {
    let n = mag.size as isize;
    let r0 = row.floor();
    let c0 = col.floor();
    let fr = row - r0;
    let fc = col - c0;
    let r0 = r0.as_f64() as isize;
    let c0 = c0.as_f64() as isize;
    let mut acc = T::zero();
    for (dr, wr) in [(0, T::one() - fr), (1, fr)] {
        for (dc, wc) in [(0, T::one() - fc), (1, fc)] {
            let r = r0 + dr;
            let c = c0 + dc;
            if r >= 0 && r < n && c >= 0 && c < n {
                acc = acc + wr * wc * mag.at(r as usize, c as usize);
            }
        }
    }
    acc
}

/// Project a DC-centered magnitude onto the 2B x 2B sphere grid.
///
/// Northern hemisphere: rho = rho_max * beta / (pi/2), theta = phi; the
/// southern hemisphere mirrors it through the point symmetry of the
/// magnitude. Bins with rho < 2 are zeroed (DC region carries window and
/// extent energy, not scene structure).
pub fn project_to_sphere<T: Scalar>(
    mag: &SpectralMagnitude<T>,
    bandwidth: usize,
) -> Result<SphericalFunction<T>> {
    if bandwidth < 16 {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be >= 16, got {bandwidth}"
        )));
    }
    let rho_max = mag.size as f64 / 2.0 - 1.0;
    // the outer frequency ring only supports ~2*pi*rho_max distinct angles
    if 2 * bandwidth > (std::f64::consts::TAU * rho_max) as usize {
        return Err(Error::BandwidthTooHigh {
            bandwidth,
            size: mag.size,
        });
    }
    let b = bandwidth;
    let n = 2 * b;
    let center = T::cast(mag.size as f64 / 2.0);
    let mut f = SphericalFunction::zeros(b);
    for j in 0..n {
        let beta = SphericalFunction::<T>::beta(b, j);
        let (rho, flip) = if beta <= std::f64::consts::FRAC_PI_2 {
            (rho_max * beta / std::f64::consts::FRAC_PI_2, false)
        } else {
            (
                rho_max * (std::f64::consts::PI - beta) / std::f64::consts::FRAC_PI_2,
                true,
            )
        };
        if rho < 2.0 {
            continue;
        }
        for k in 0..n {
            let mut theta = SphericalFunction::<T>::phi(b, k);
            if flip {
                theta += std::f64::consts::PI;
            }
            let row = center + T::cast(rho * theta.sin());
            let col = center + T::cast(rho * theta.cos());
            *f.at_mut(j, k) = bilinear_mag(mag, row, col);
        }
    }
    Ok(f)
}

/// Forward spherical harmonic transform (plan built per call; reuse
/// `ShtPlan` directly on hot paths).
pub fn sphere_transform<T: Scalar>(f: &SphericalFunction<T>) -> Result<ShCoefficients<T>> {
    ShtPlan::new(f.bandwidth).forward(f)
}

/// Order-correlation terms T_m = sum_l f_lm conj(g_lm) for m in (-B, B).
fn order_terms<T: Scalar>(
    fc: &ShCoefficients<T>,
    gc: &ShCoefficients<T>,
) -> Result<Vec<Complex<T>>> {
    if fc.bandwidth != gc.bandwidth {
        return Err(Error::BandwidthMismatch(fc.bandwidth, gc.bandwidth));
    }
    let b = fc.bandwidth as isize;
    let mut terms = vec![Complex::new(T::zero(), T::zero()); (2 * b - 1) as usize];
    for m in -(b - 1)..b {
        let mut acc = Complex::new(T::zero(), T::zero());
        for l in m.unsigned_abs()..b as usize {
            acc += fc.at(l, m) * gc.at(l, m).conj();
        }
        terms[(m + b - 1) as usize] = acc;
    }
    Ok(terms)
}

/// Evaluate C(gamma_k) = Re sum_m T_m e^{-i m gamma_k} on an n_out-point grid
/// over [0, 2pi).
fn eval_profile<T: Scalar>(terms: &[Complex<T>], bandwidth: usize, n_out: usize) -> Vec<T> {
    let b = bandwidth as isize;
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_out];
    for m in -(b - 1)..b {
        let idx = (m.rem_euclid(n_out as isize)) as usize;
        buf[idx] += terms[(m + b - 1) as usize];
    }
    let mut planner = FftPlanner::new();
    // forward FFT kernel e^{-2pi i m k / n} matches e^{-i m gamma_k}
    planner.plan_fft_forward(n_out).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Correlation of two coefficient sets over rotations about the polar axis,
/// sampled at gamma_k = pi k / B for k = 0..2B.
pub fn so3_correlate<T: Scalar>(
    fc: &ShCoefficients<T>,
    gc: &ShCoefficients<T>,
) -> Result<Vec<T>> {
    let terms = order_terms(fc, gc)?;
    Ok(eval_profile(&terms, fc.bandwidth, 2 * fc.bandwidth))
}

/// Rotate a coefficient set about the polar axis by gamma (exact, in
/// coefficient space): c_lm -> e^{-i m gamma} c_lm.
pub fn rotate_coefficients_z<T: Scalar>(c: &ShCoefficients<T>, gamma: T) -> ShCoefficients<T> {
    let b = c.bandwidth;
    let mut out = c.clone();
    for l in 0..b {
        for m in -(l as isize)..=(l as isize) {
            let phase = -T::cast(m as f64) * gamma;
            let rot = Complex::from_polar(T::one(), phase);
            *out.at_mut(l, m) = c.at(l, m) * rot;
        }
    }
    out
}

/// Peak of a cyclic profile with quadratic interpolation; returns fractional
/// index. Ties break toward the lowest index.
fn cyclic_argmax_interp<T: Scalar>(profile: &[T]) -> (usize, T) {
    let n = profile.len();
    let mut best = 0usize;
    for (i, &v) in profile.iter().enumerate() {
        if v > profile[best] {
            best = i;
        }
    }
    let l = profile[(best + n - 1) % n];
    let c = profile[best];
    let r = profile[(best + 1) % n];
    let denom = l - c - c + r;
    let delta = if denom < T::zero() {
        let d = (l - r) / (T::cast(2.0) * denom);
        d.max(-T::cast(0.5)).min(T::cast(0.5))
    } else {
        T::zero()
    };
    let _ = best;
    (best, delta)
}

fn profile_checks<T: Scalar>(profile: &[T]) -> Result<()> {
    let max = profile.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mean = profile.iter().fold(T::zero(), |s, &v| s + v)
        / T::cast(profile.len() as f64);
    if !(max > T::zero()) || !(mean > T::zero()) {
        return Err(Error::NoStructure);
    }
    if max / mean < T::one() + T::cast(1e-6) {
        return Err(Error::NoStructure);
    }
    Ok(())
}

/// Peak-to-second-peak ratio on a profile folded to its pi period.
/// Ratio is clamped into [1, 1e6]; 1e6 stands in for "no second peak".
fn folded_confidence<T: Scalar>(profile: &[T]) -> T {
    let n = profile.len();
    let half = n / 2;
    let folded: Vec<T> = (0..half)
        .map(|k| profile[k].max(profile[k + half]))
        .collect();
    let mut peak_idx = 0usize;
    for (i, &v) in folded.iter().enumerate() {
        if v > folded[peak_idx] {
            peak_idx = i;
        }
    }
    let peak = folded[peak_idx];
    let excl = (half / 32).max(2);
    let mut second = T::neg_infinity();
    for (i, &v) in folded.iter().enumerate() {
        let d = (i as isize - peak_idx as isize).rem_euclid(half as isize) as usize;
        let d = d.min(half - d);
        if d > excl && v > second {
            second = v;
        }
    }
    let cap = T::cast(1e6);
    if !(peak > T::zero()) {
        return T::one();
    }
    if !(second > T::zero()) {
        return cap;
    }
    (peak / second).max(T::one()).min(cap)
}

fn estimate_from_profile<T: Scalar>(
    coarse_profile: Vec<T>,
    fine_profile: &[T],
) -> Result<RotationEstimate<T>> {
    profile_checks(fine_profile)?;
    let n = fine_profile.len();
    let (idx, delta) = cyclic_argmax_interp(fine_profile);
    let gamma = (T::cast(idx as f64) + delta) * T::cast(std::f64::consts::TAU / n as f64);
    let pi = T::PI();
    let mut angle = gamma % pi;
    if angle < T::zero() {
        angle = angle + pi;
    }
    let c0 = normalize_angle(angle);
    let c1 = normalize_angle(angle - pi);
    Ok(RotationEstimate {
        angle_mod_pi: angle,
        candidates: (c0, c1),
        correlation_profile: coarse_profile,
        confidence: folded_confidence(fine_profile),
    })
}

/// Rotation between two magnitudes via the spherical-harmonic correlation.
pub fn estimate_rotation<T: Scalar>(
    mag_a: &SpectralMagnitude<T>,
    mag_b: &SpectralMagnitude<T>,
    bandwidth: usize,
) -> Result<RotationEstimate<T>> {
    if mag_a.size != mag_b.size {
        return Err(Error::SizeMismatch(mag_a.size, mag_b.size));
    }
    let plan = ShtPlan::new(bandwidth);
    estimate_rotation_with_plan(mag_a, mag_b, &plan)
}

/// As `estimate_rotation` with a caller-owned transform plan.
pub fn estimate_rotation_with_plan<T: Scalar>(
    mag_a: &SpectralMagnitude<T>,
    mag_b: &SpectralMagnitude<T>,
    plan: &ShtPlan<T>,
) -> Result<RotationEstimate<T>> {
    if mag_a.size != mag_b.size {
        return Err(Error::SizeMismatch(mag_a.size, mag_b.size));
    }
    let bandwidth = plan.bandwidth;
    let fa = project_to_sphere(mag_a, bandwidth)?;
    let fb = project_to_sphere(mag_b, bandwidth)?;
    let ca = plan.forward(&fa)?;
    let cb = plan.forward(&fb)?;
    // argmax of <f_a, R_z(gamma) f_b> is the rotation of b relative to a
    let terms = order_terms(&ca, &cb)?;
    let coarse = eval_profile(&terms, bandwidth, 2 * bandwidth);
    let fine = eval_profile(&terms, bandwidth, PROFILE_UPSAMPLE * 2 * bandwidth);
    estimate_from_profile(coarse, &fine)
}

/// Independent baseline: resample each magnitude on a polar grid, integrate
/// over radius, and circularly correlate the angular energy profiles.
pub fn estimate_rotation_polar_oracle<T: Scalar>(
    mag_a: &SpectralMagnitude<T>,
    mag_b: &SpectralMagnitude<T>,
    angular_bins: usize,
) -> Result<RotationEstimate<T>> {
    if mag_a.size != mag_b.size {
        return Err(Error::SizeMismatch(mag_a.size, mag_b.size));
    }
    if angular_bins < 8 {
        return Err(Error::InvalidInput("angular_bins must be >= 8".into()));
    }
    let profile = |mag: &SpectralMagnitude<T>| -> Vec<T> {
        let center = T::cast(mag.size as f64 / 2.0);
        let rho_max = mag.size / 2 - 1;
        (0..angular_bins)
            .map(|a| {
                let theta = std::f64::consts::TAU * a as f64 / angular_bins as f64;
                let mut acc = T::zero();
                for rho in 2..=rho_max {
                    let row = center + T::cast(rho as f64 * theta.sin());
                    let col = center + T::cast(rho as f64 * theta.cos());
                    acc = acc + bilinear_mag(mag, row, col);
                }
                acc
            })
            .collect()
    };
    let pa = profile(mag_a);
    let pb = profile(mag_b);
    // X[s] = sum_a pa[a] * pb[a + s]: peaks where pb leads pa by the rotation
    let n = angular_bins;
    let corr: Vec<T> = (0..n)
        .map(|s| {
            let mut acc = T::zero();
            for a in 0..n {
                acc = acc + pa[a] * pb[(a + s) % n];
            }
            acc
        })
        .collect();
    profile_checks(&corr)?;
    let (idx, delta) = cyclic_argmax_interp(&corr);
    // pb[a] = pa[a - k] puts the correlation peak at s = k, i.e. rotation of
    // b relative to a is +2 pi k / n
    let gamma = (T::cast(idx as f64) + delta) * T::cast(std::f64::consts::TAU / n as f64);
    let pi = T::PI();
    let mut angle = gamma % pi;
    if angle < T::zero() {
        angle = angle + pi;
    }
    Ok(RotationEstimate {
        angle_mod_pi: angle,
        candidates: (normalize_angle(angle), normalize_angle(angle - pi)),
        confidence: folded_confidence(&corr),
        correlation_profile: corr,
    })
}
