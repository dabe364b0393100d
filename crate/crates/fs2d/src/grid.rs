//! Polar-to-Cartesian gridding of radar sweeps and grid preprocessing.
//!
//! Coordinate convention used throughout the crate: the sensor sits at cell
//! (size/2, size/2); column index j maps to x, row index i maps to y, so a
//! return at azimuth 0 lands on the +x half-axis. Azimuth is measured
//! counter-clockwise from +x.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// One raw radar sweep: an azimuth x range intensity matrix plus geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan<T> {
    pub azimuth_count: usize,
    pub range_bin_count: usize,
    /// Meters per range bin.
    pub range_resolution: T,
    /// Radians, strictly ascending, all in [0, 2pi).
    pub azimuth_angles: Vec<T>,
    /// Row-major azimuth_count x range_bin_count, all values >= 0.
    pub intensities: Vec<T>,
    /// Seconds.
    pub timestamp: f64,
}

impl<T: Scalar> PolarScan<T> {
    pub fn validate(&self) -> Result<()> {
        if self.azimuth_count == 0 || self.range_bin_count == 0 {
            return Err(Error::InvalidInput("empty scan dimensions".into()));
        }
        if self.azimuth_angles.len() != self.azimuth_count {
            return Err(Error::InvalidInput(format!(
                "azimuth_angles length {} != azimuth_count {}",
                self.azimuth_angles.len(),
                self.azimuth_count
            )));
        }
        if self.intensities.len() != self.azimuth_count * self.range_bin_count {
            return Err(Error::InvalidInput(format!(
                "intensity matrix length {} != {}x{}",
                self.intensities.len(),
                self.azimuth_count,
                self.range_bin_count
            )));
        }
        if !(self.range_resolution > T::zero()) {
            return Err(Error::InvalidInput("range_resolution must be > 0".into()));
        }
        let two_pi = T::cast(std::f64::consts::TAU);
        for (i, &a) in self.azimuth_angles.iter().enumerate() {
            if !(a >= T::zero() && a < two_pi) {
                return Err(Error::InvalidInput(format!(
                    "azimuth {i} out of [0, 2pi)"
                )));
            }
            if i > 0 && !(a > self.azimuth_angles[i - 1]) {
                return Err(Error::InvalidInput(format!(
                    "azimuth_angles not strictly ascending at index {i}"
                )));
            }
        }
        if self.intensities.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput("negative or non-finite intensity".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn intensity(&self, azimuth: usize, range_bin: usize) -> T {
        self.intensities[azimuth * self.range_bin_count + range_bin]
    }

    /// Maximum range covered by the sweep, in meters.
    pub fn max_range(&self) -> T {
        T::cast(self.range_bin_count as f64 - 1.0) * self.range_resolution
    }
}

/// Apodization window applied by `preprocess`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct GridConfig<T> {
    /// Cells per side; even, >= 32.
    pub grid_size: usize,
    /// Meters per cell.
    pub cell_size: T,
    /// Threshold as a fraction of the grid maximum, in [0, 1].
    pub noise_floor: T,
    pub window: Window,
    /// Apply log(1 + v) compression after thresholding.
    pub log_scale: bool,
}

impl<T: Scalar> Default for GridConfig<T> {
    fn default() -> Self {
        Self {
            grid_size: 256,
            cell_size: T::cast(0.75),
            noise_floor: T::cast(0.05),
            window: Window::Hann,
            log_scale: false,
        }
    }
}

impl<T: Scalar> GridConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 32 || self.grid_size % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid_size must be even and >= 32, got {}",
                self.grid_size
            )));
        }
        if !(self.cell_size > T::zero()) {
            return Err(Error::InvalidInput("cell_size must be > 0".into()));
        }
        if !(self.noise_floor >= T::zero() && self.noise_floor <= T::one()) {
            return Err(Error::InvalidInput("noise_floor must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Square intensity image at fixed metric cell size, sensor at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid<T> {
    pub size: usize,
    pub cell_size: T,
    /// Row-major size x size, all values >= 0 and finite.
    pub values: Vec<T>,
}

impl<T: Scalar> CartesianGrid<T> {
    pub fn zeros(size: usize, cell_size: T) -> Self {
        Self {
            size,
            cell_size,
            values: vec![T::zero(); size * size],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.values[row * self.size + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.values[row * self.size + col]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| if v > m { v } else { m })
    }

    /// Bilinear sample at fractional (row, col); zero outside the grid.
    pub fn sample(&self, row: T, col: T) -> T {
        let n = self.size as isize;
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
                    acc = acc + wr * wc * self.at(r as usize, c as usize);
                }
            }
        }
        acc
    }

    /// Image content rotated counter-clockwise by `angle` about the grid
    /// center, bilinear resampling, zero fill.
    pub fn rotated(&self, angle: T) -> Self {
        let mut out = Self::zeros(self.size, self.cell_size);
        let c = T::cast(self.size as f64 / 2.0);
        let (s, co) = angle.sin_cos();
        for i in 0..self.size {
            let y = T::cast(i as f64) - c;
            for j in 0..self.size {
                let x = T::cast(j as f64) - c;
                // inverse rotation of the output coordinate
                let sx = co * x + s * y;
                let sy = -s * x + co * y;
                let v = self.sample(sy + c, sx + c);
                *out.at_mut(i, j) = if v > T::zero() { v } else { T::zero() };
            }
        }
        out
    }
}

/// Non-fatal conditions detected while gridding.
#[derive(Debug, Clone, PartialEq)]
pub enum GridWarning {
    /// Largest azimuth gap exceeded twice the median step.
    DegradedCoverage { max_gap: f64, median_step: f64 },
}

/// Grid a polar sweep, reporting coverage warnings.
pub fn polar_to_cartesian_checked<T: Scalar>(
    scan: &PolarScan<T>,
    cfg: &GridConfig<T>,
) -> Result<(CartesianGrid<T>, Vec<GridWarning>)> {
    scan.validate()?;
    cfg.validate()?;

    let mut warnings = Vec::new();
    if let Some(w) = coverage_warning(scan) {
        warnings.push(w);
    }

    let n = cfg.grid_size;
    let mut grid = CartesianGrid::zeros(n, cfg.cell_size);
    let center = T::cast(n as f64 / 2.0);
    let max_range = scan.max_range();
    let two_pi = T::cast(std::f64::consts::TAU);

    for i in 0..n {
        let y = (T::cast(i as f64) - center) * cfg.cell_size;
        for j in 0..n {
            let x = (T::cast(j as f64) - center) * cfg.cell_size;
            let r = (x * x + y * y).sqrt();
            if r > max_range {
                continue;
            }
            let mut az = y.atan2(x);
            if az < T::zero() {
                az = az + two_pi;
            }
            *grid.at_mut(i, j) = sample_polar(scan, az, r);
        }
    }
    Ok((grid, warnings))
}

/// Grid a polar sweep; warnings are dropped.
pub fn polar_to_cartesian<T: Scalar>(
    scan: &PolarScan<T>,
    cfg: &GridConfig<T>,
) -> Result<CartesianGrid<T>> {
    polar_to_cartesian_checked(scan, cfg).map(|(g, _)| g)
}

fn coverage_warning<T: Scalar>(scan: &PolarScan<T>) -> Option<GridWarning> {
    let n = scan.azimuth_count;
    if n < 2 {
        return None;
    }
    let mut steps: Vec<f64> = (1..n)
        .map(|i| (scan.azimuth_angles[i] - scan.azimuth_angles[i - 1]).as_f64())
        .collect();
    // wrap-around gap
    steps.push(std::f64::consts::TAU - scan.azimuth_angles[n - 1].as_f64()
        + scan.azimuth_angles[0].as_f64());
    let mut sorted = steps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let max_gap = sorted[sorted.len() - 1];
    if max_gap > 2.0 * median {
        Some(GridWarning::DegradedCoverage {
            max_gap,
            median_step: median,
        })
    } else {
        None
    }
}

/// Bilinear interpolation in (azimuth, range), azimuth cyclic.
fn sample_polar<T: Scalar>(scan: &PolarScan<T>, azimuth: T, range: T) -> T {
    let rb = range / scan.range_resolution;
    let k0 = rb.floor().as_f64() as usize;
    if k0 + 1 > scan.range_bin_count {
        return T::zero();
    }
    let fr = rb - rb.floor();

    let angles = &scan.azimuth_angles;
    let n = scan.azimuth_count;
    let two_pi = T::cast(std::f64::consts::TAU);
    // index of the first angle > azimuth
    let hi = angles.partition_point(|a| *a <= azimuth);
    let (a_lo, a_hi, lo, hi) = if hi == 0 {
        // below the first sample: wraps to the last one
        (angles[n - 1] - two_pi, angles[0], n - 1, 0)
    } else if hi == n {
        (angles[n - 1], angles[0] + two_pi, n - 1, 0)
    } else {
        (angles[hi - 1], angles[hi], hi - 1, hi)
    };
    let span = a_hi - a_lo;
    let fa = if span > T::zero() { (azimuth - a_lo) / span } else { T::zero() };

    let mut acc = T::zero();
    for (az_idx, wa) in [(lo, T::one() - fa), (hi, fa)] {
        for (k, wr) in [(k0, T::one() - fr), (k0 + 1, fr)] {
            if k < scan.range_bin_count && wa * wr > T::zero() {
                acc = acc + wa * wr * scan.intensity(az_idx, k);
            }
        }
    }
    acc
}

/// Radial Hann apodization value at a given cell, 1 at the center, 0 at and
/// beyond radius size/2.
pub fn radial_hann<T: Scalar>(size: usize, row: usize, col: usize) -> T {
    let c = size as f64 / 2.0;
    let dy = row as f64 - c;
    let dx = col as f64 - c;
    let r = (dx * dx + dy * dy).sqrt();
    let rmax = c;
    if r >= rmax {
        T::zero()
    } else {
        T::cast(0.5 * (1.0 + (std::f64::consts::PI * r / rmax).cos()))
    }
}

/// Threshold at noise_floor x max, optional log compression, then apodize.
pub fn preprocess<T: Scalar>(grid: &CartesianGrid<T>, cfg: &GridConfig<T>) -> CartesianGrid<T> {
    let mut out = grid.clone();
    let threshold = cfg.noise_floor * grid.max_value();
    for v in &mut out.values {
        if *v < threshold {
            *v = T::zero();
        } else if cfg.log_scale {
            *v = (*v + T::one()).ln();
        }
    }
    if cfg.window == Window::Hann {
        let n = out.size;
        for i in 0..n {
            for j in 0..n {
                let w = radial_hann::<T>(n, i, j);
                *out.at_mut(i, j) = out.at(i, j) * w;
            }
        }
    }
    out
}

/// Polar-domain interference removal: drops ghost beams (azimuth rows
/// saturated across most of their range extent) and isolated strong returns
/// without neighborhood support. Real structure spans adjacent azimuths or
/// range bins and survives; salt-and-pepper hits and ghost beams do not.
pub fn despeckle<T: Scalar>(scan: &PolarScan<T>) -> PolarScan<T> {
    let ac = scan.azimuth_count;
    let rbc = scan.range_bin_count;
    let max = scan
        .intensities
        .iter()
        .fold(T::zero(), |m, &v| if v > m { v } else { m });
    let mut out = scan.clone();
    if !(max > T::zero()) {
        return out;
    }
    let threshold = T::cast(0.1) * max;
    let mut strong = vec![false; ac * rbc];
    for a in 0..ac {
        let row = &scan.intensities[a * rbc..(a + 1) * rbc];
        let count = row.iter().filter(|&&v| v > threshold).count();
        if count * 2 > rbc {
            // ghost beam: no physical scene fills most of a single beam
            for v in &mut out.intensities[a * rbc..(a + 1) * rbc] {
                *v = T::zero();
            }
        } else {
            for (r, &v) in row.iter().enumerate() {
                strong[a * rbc + r] = v > threshold;
            }
        }
    }
    for a in 0..ac {
        for r in 0..rbc {
            if !strong[a * rbc + r] {
                continue;
            }
            let mut support = 0usize;
            for da in -1isize..=1 {
                for dr in -1isize..=1 {
                    if da == 0 && dr == 0 {
                        continue;
                    }
                    let aa = (a as isize + da).rem_euclid(ac as isize) as usize;
                    let rr = r as isize + dr;
                    if rr >= 0 && (rr as usize) < rbc && strong[aa * rbc + rr as usize] {
                        support += 1;
                    }
                }
            }
            if support < 2 {
                out.intensities[a * rbc + r] = T::zero();
            }
        }
    }
    out
}
