//! 2D DFT utilities, translation-invariant magnitude spectra, and normalized
//! phase correlation.
//!
//! Normalization convention: `dft2` is the plain unnormalized forward DFT, so
//! Parseval reads sum |spectrum|^2 = size^2 * sum grid^2. The correlation
//! surface is scaled by 1/size^2, which puts the self-correlation peak at 1.

use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::scalar::Scalar;
use num_complex::Complex;
use rustfft::FftPlanner;

/// Forward 2D DFT of a real grid, DC component at the matrix center.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum<T> {
    pub size: usize,
    /// Row-major, fft-shifted: DC at (size/2, size/2).
    pub values: Vec<Complex<T>>,
}

/// Elementwise modulus of a spectrum; translation-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMagnitude<T> {
    pub size: usize,
    /// Row-major, DC-centered.
    pub values: Vec<T>,
}

/// Real correlation surface; index (i, j) corresponds to cyclic shift (i, j),
/// with shifts reported wrapped into [-size/2, size/2).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface<T> {
    pub size: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> ComplexSpectrum<T> {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex<T> {
        self.values[row * self.size + col]
    }
}

impl<T: Scalar> SpectralMagnitude<T> {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.values[row * self.size + col]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| if v > m { v } else { m })
    }
}

impl<T: Scalar> CorrelationSurface<T> {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.values[row * self.size + col]
    }

    /// Wrap a surface index into a signed shift in [-size/2, size/2).
    pub fn wrap(&self, idx: usize) -> isize {
        let n = self.size as isize;
        let i = idx as isize;
        if i >= n / 2 {
            i - n
        } else {
            i
        }
    }

    /// Global maximum: (row shift, col shift, value). Ties break toward the
    /// lowest row-major index, which keeps results deterministic.
    pub fn peak(&self) -> (isize, isize, T) {
        let mut best = T::neg_infinity();
        let mut best_idx = 0usize;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > best {
                best = v;
                best_idx = idx;
            }
        }
        let i = best_idx / self.size;
        let j = best_idx % self.size;
        (self.wrap(i), self.wrap(j), best)
    }
}

/// In-place 2D FFT over a row-major square buffer.
fn fft2_inplace<T: Scalar>(data: &mut [Complex<T>], size: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    };
    for row in data.chunks_exact_mut(size) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(T::zero(), T::zero()); size];
    for j in 0..size {
        for i in 0..size {
            col[i] = data[i * size + j];
        }
        fft.process(&mut col);
        for i in 0..size {
            data[i * size + j] = col[i];
        }
    }
}

/// Swap quadrants so DC moves between index 0 and index size/2. Self-inverse
/// for even sizes.
fn fftshift<T: Copy>(data: &mut [Complex<T>], size: usize) {
    let h = size / 2;
    for i in 0..h {
        for j in 0..size {
            let src = i * size + j;
            let dst = ((i + h) % size) * size + (j + h) % size;
            data.swap(src, dst);
        }
    }
}

/// Forward 2D DFT, DC-centered, unnormalized.
pub fn dft2<T: Scalar>(grid: &CartesianGrid<T>) -> ComplexSpectrum<T> {
    let n = grid.size;
    let mut data: Vec<Complex<T>> = grid
        .values
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fft2_inplace(&mut data, n, false);
    fftshift(&mut data, n);
    ComplexSpectrum { size: n, values: data }
}

/// Elementwise complex modulus.
pub fn magnitude<T: Scalar>(spec: &ComplexSpectrum<T>) -> SpectralMagnitude<T> {
    SpectralMagnitude {
        size: spec.size,
        values: spec.values.iter().map(|c| c.norm()).collect(),
    }
}

/// Whitened cross-power spectrum: A * conj(B) / max(|A * conj(B)|, eps).
pub fn cross_power<T: Scalar>(
    a: &ComplexSpectrum<T>,
    b: &ComplexSpectrum<T>,
    eps: T,
) -> Result<ComplexSpectrum<T>> {
    if a.size != b.size {
        return Err(Error::SizeMismatch(a.size, b.size));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("eps must be > 0".into()));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            let p = x * y.conj();
            let m = p.norm();
            let d = if m > eps { m } else { eps };
            p / d
        })
        .collect();
    Ok(ComplexSpectrum { size: a.size, values })
}

/// Default whitening guard: 1e-12 times the largest cross-power modulus.
/// Pure whitening is unstable on the zero bins that thresholding introduces.
pub fn default_eps<T: Scalar>(a: &ComplexSpectrum<T>, b: &ComplexSpectrum<T>) -> T {
    let max = a
        .values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |m, (&x, &y)| {
            let v = (x * y.conj()).norm();
            if v > m {
                v
            } else {
                m
            }
        });
    let eps = T::cast(1e-12) * max;
    if eps > T::zero() {
        eps
    } else {
        T::cast(1e-300).max(T::min_positive_value())
    }
}

/// Phase correlation: the peak of the returned surface sits at the cyclic
/// translation of `b` relative to `a`.
pub fn phase_correlate<T: Scalar>(
    a: &CartesianGrid<T>,
    b: &CartesianGrid<T>,
) -> Result<CorrelationSurface<T>> {
    if a.size != b.size {
        return Err(Error::SizeMismatch(a.size, b.size));
    }
    let sa = dft2(a);
    let sb = dft2(b);
    correlate_spectra(&sa, &sb)
}

/// Phase correlation from precomputed spectra.
pub fn correlate_spectra<T: Scalar>(
    a: &ComplexSpectrum<T>,
    b: &ComplexSpectrum<T>,
) -> Result<CorrelationSurface<T>> {
    let n = a.size;
    let eps = default_eps(a, b);
    let q = cross_power(a, b, eps)?;
    let mut data = q.values;
    fftshift(&mut data, n);
    fft2_inplace(&mut data, n, true);
    let norm = T::cast((n * n) as f64);
    // The inverse transform of A*conj(B) peaks at minus the shift of b
    // relative to a; store with negated indices so the surface peak lands at
    // the shift itself. Imaginary residue (< 1e-9 for real inputs) is dropped.
    let mut values = vec![T::zero(); n * n];
    for i in 0..n {
        let ni = (n - i) % n;
        for j in 0..n {
            let nj = (n - j) % n;
            values[ni * n + nj] = data[i * n + j].re / norm;
        }
    }
    Ok(CorrelationSurface { size: n, values })
}

/// Cyclic shift of grid content by (rows, cols); content at (i, j) moves to
/// (i + rows, j + cols) mod size.
pub fn circshift<T: Scalar>(grid: &CartesianGrid<T>, rows: isize, cols: isize) -> CartesianGrid<T> {
    let n = grid.size as isize;
    let mut out = CartesianGrid::zeros(grid.size, grid.cell_size);
    for i in 0..grid.size {
        for j in 0..grid.size {
            let di = ((i as isize + rows).rem_euclid(n)) as usize;
            let dj = ((j as isize + cols).rem_euclid(n)) as usize;
            *out.at_mut(di, dj) = grid.at(i, j);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_grid(size: usize, seed: u64) -> CartesianGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CartesianGrid::zeros(size, 1.0);
        for v in &mut g.values {
            *v = rng.gen::<f64>();
        }
        g
    }

    /// Direct O(N^4) DFT oracle, DC-centered to match dft2.
    fn dft2_oracle(grid: &CartesianGrid<f64>) -> ComplexSpectrum<f64> {
        let n = grid.size;
        let mut values = vec![Complex::new(0.0, 0.0); n * n];
        for ku in 0..n {
            for kv in 0..n {
                // DC-centered frequency indices
                let fu = ku as isize - (n / 2) as isize;
                let fv = kv as isize - (n / 2) as isize;
                let mut acc = Complex::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let phase = -std::f64::consts::TAU
                            * (fu as f64 * i as f64 + fv as f64 * j as f64)
                            / n as f64;
                        acc += Complex::from_polar(grid.at(i, j), phase);
                    }
                }
                values[ku * n + kv] = acc;
            }
        }
        ComplexSpectrum { size: n, values }
    }

    #[test]
    fn zero_grid_zero_spectrum() {
        let g = CartesianGrid::<f64>::zeros(16, 1.0);
        let s = dft2(&g);
        assert!(s.values.iter().all(|c| c.norm() == 0.0));
        assert!(magnitude(&s).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut g = CartesianGrid::<f64>::zeros(16, 1.0);
        *g.at_mut(8, 8) = 1.0;
        let m = magnitude(&dft2(&g));
        for &v in &m.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dft2_matches_oracle_and_parseval() {
        for &size in &[8usize, 12, 16] {
            let g = random_grid(size, size as u64);
            let s = dft2(&g);
            let o = dft2_oracle(&g);
            let max_mag = s.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in s.values.iter().zip(&o.values) {
                assert!((a - b).norm() < 1e-10 * max_mag.max(1.0));
            }
            let sum_spec: f64 = s.values.iter().map(|c| c.norm_sqr()).sum();
            let sum_grid: f64 = g.values.iter().map(|v| v * v).sum();
            let expected = size as f64 * size as f64 * sum_grid;
            assert!((sum_spec - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn magnitude_point_symmetric_for_real_input() {
        let g = random_grid(16, 99);
        let m = magnitude(&dft2(&g));
        let n = 16isize;
        let c = n / 2;
        for i in 0..16isize {
            for j in 0..16isize {
                let mi = (c + (c - i)).rem_euclid(n) as usize;
                let mj = (c + (c - j)).rem_euclid(n) as usize;
                // skip rows/cols without a mirror partner on the even grid
                if i == 0 || j == 0 {
                    continue;
                }
                let a = m.at(i as usize, j as usize);
                let b = m.at(mi, mj);
                assert!((a - b).abs() < 1e-9 * m.max_value());
            }
        }
    }

    #[test]
    fn magnitude_invariant_under_cyclic_shift() {
        let g = random_grid(32, 5);
        let shifted = circshift(&g, 4, -2);
        let m1 = magnitude(&dft2(&g));
        let m2 = magnitude(&dft2(&shifted));
        let max = m1.max_value();
        for (a, b) in m1.values.iter().zip(&m2.values) {
            assert!((a - b).abs() < 1e-9 * max);
        }
    }

    #[test]
    fn magnitude_rotates_with_quarter_turn() {
        let g = random_grid(16, 17);
        // exact 90 degree gridded rotation about the DFT center
        let n = 16usize;
        let mut rot = CartesianGrid::zeros(n, 1.0);
        for i in 0..n {
            for j in 0..n {
                // (x, y) -> (-y, x) about the center cell n/2
                let x = j as isize - 8;
                let y = i as isize - 8;
                let xj = (-y + 8).rem_euclid(n as isize) as usize;
                let yi = (x + 8).rem_euclid(n as isize) as usize;
                *rot.at_mut(yi, xj) = g.at(i, j);
            }
        }
        let m1 = magnitude(&dft2(&g));
        let m2 = magnitude(&dft2(&rot));
        let max = m1.max_value();
        for i in 0..n {
            for j in 0..n {
                let x = j as isize - 8;
                let y = i as isize - 8;
                let xj = (-y + 8).rem_euclid(n as isize) as usize;
                let yi = (x + 8).rem_euclid(n as isize) as usize;
                assert!((m1.at(i, j) - m2.at(yi, xj)).abs() < 1e-9 * max);
            }
        }
    }

    #[test]
    fn cross_power_identity_is_unit_modulus() {
        let g = random_grid(16, 3);
        let s = dft2(&g);
        let q = cross_power(&s, &s, 1e-15).unwrap();
        for c in &q.values {
            assert!((c.norm() - 1.0).abs() < 1e-9);
            assert!(c.im.abs() < 1e-9);
            assert!(c.re > 0.0);
        }
    }

    #[test]
    fn cross_power_zero_spectrum_guarded() {
        let z = ComplexSpectrum {
            size: 8,
            values: vec![Complex::new(0.0, 0.0); 64],
        };
        let q = cross_power(&z, &z, 1e-12).unwrap();
        assert!(q.values.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cross_power_size_mismatch_errors() {
        let a = dft2(&CartesianGrid::<f64>::zeros(8, 1.0));
        let b = dft2(&CartesianGrid::<f64>::zeros(16, 1.0));
        assert!(cross_power(&a, &b, 1e-12).is_err());
    }

    #[test]
    fn self_correlation_peaks_at_origin() {
        let g = random_grid(32, 8);
        let surf = phase_correlate(&g, &g).unwrap();
        let (si, sj, v) = surf.peak();
        assert_eq!((si, sj), (0, 0));
        assert!(v > 0.99);
    }

    #[test]
    fn shift_recovered_exactly() {
        let g = random_grid(64, 21);
        let shifted = circshift(&g, 4, -2);
        let surf = phase_correlate(&g, &shifted).unwrap();
        let (si, sj, v) = surf.peak();
        assert_eq!((si, sj), (4, -2));
        assert!(v > 0.99);
    }

    #[test]
    fn correlation_antisymmetric_in_arguments() {
        let g = random_grid(32, 55);
        let shifted = circshift(&g, -7, 11);
        let fwd = phase_correlate(&g, &shifted).unwrap().peak();
        let bwd = phase_correlate(&shifted, &g).unwrap().peak();
        assert_eq!((fwd.0, fwd.1), (-bwd.0, -bwd.1));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn prop_shift_recovery(seed in 0u64..10_000, di in -16isize..16, dj in -16isize..16) {
            let g = random_grid(64, seed);
            let shifted = circshift(&g, di, dj);
            let surf = phase_correlate(&g, &shifted).unwrap();
            let (si, sj, _) = surf.peak();
            proptest::prop_assert_eq!((si, sj), (di, dj));
        }
    }
}
