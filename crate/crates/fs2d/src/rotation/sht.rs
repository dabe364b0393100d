//! Spherical harmonic analysis on the 2B x 2B equiangular grid
//! (colatitude beta_j = pi(2j+1)/(4B), longitude phi_k = pi k / B).
//!
//! Fully normalized complex spherical harmonics with Condon-Shortley phase:
//! Y_l^m = Pbar_l^m(cos beta) e^{i m phi}, orthonormal over the sphere.
//! Quadrature weights follow the Driscoll-Healy construction for this grid,
//! which makes the forward transform exact for inputs band-limited below B.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use num_complex::Complex;
use rustfft::FftPlanner;

/// Real function sampled on the 2B x 2B equiangular sphere grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalFunction<T> {
    pub bandwidth: usize,
    /// Row-major: row j = colatitude index, column k = longitude index.
    pub samples: Vec<T>,
}

impl<T: Scalar> SphericalFunction<T> {
    pub fn zeros(bandwidth: usize) -> Self {
        Self {
            bandwidth,
            samples: vec![T::zero(); 4 * bandwidth * bandwidth],
        }
    }

    #[inline]
    pub fn at(&self, beta_idx: usize, phi_idx: usize) -> T {
        self.samples[beta_idx * 2 * self.bandwidth + phi_idx]
    }

    #[inline]
    pub fn at_mut(&mut self, beta_idx: usize, phi_idx: usize) -> &mut T {
        &mut self.samples[beta_idx * 2 * self.bandwidth + phi_idx]
    }

    /// Colatitude of row j.
    pub fn beta(bandwidth: usize, j: usize) -> f64 {
        std::f64::consts::PI * (2 * j + 1) as f64 / (4 * bandwidth) as f64
    }

    /// Longitude of column k.
    pub fn phi(bandwidth: usize, k: usize) -> f64 {
        std::f64::consts::PI * k as f64 / bandwidth as f64
    }
}

/// Spherical harmonic coefficients for degrees l < B, orders |m| <= l.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients<T> {
    pub bandwidth: usize,
    /// Packed l*l + (l + m).
    pub values: Vec<Complex<T>>,
}

impl<T: Scalar> ShCoefficients<T> {
    pub fn zeros(bandwidth: usize) -> Self {
        Self {
            bandwidth,
            values: vec![Complex::new(T::zero(), T::zero()); bandwidth * bandwidth],
        }
    }

    #[inline]
    pub fn index(l: usize, m: isize) -> usize {
        l * l + (l as isize + m) as usize
    }

    #[inline]
    pub fn at(&self, l: usize, m: isize) -> Complex<T> {
        self.values[Self::index(l, m)]
    }

    #[inline]
    pub fn at_mut(&mut self, l: usize, m: isize) -> &mut Complex<T> {
        &mut self.values[Self::index(l, m)]
    }
}

/// Precomputed tables for forward/inverse transforms at one bandwidth.
#[derive(Debug, Clone)]
pub struct ShtPlan<T> {
    pub bandwidth: usize,
    /// Driscoll-Healy quadrature weights (sin(beta) factor included).
    weights: Vec<T>,
    cos_beta: Vec<T>,
    sin_beta: Vec<T>,
}

impl<T: Scalar> ShtPlan<T> {
    pub fn new(bandwidth: usize) -> Self {
        let b = bandwidth;
        let n = 2 * b;
        let mut weights = Vec::with_capacity(n);
        let mut cos_beta = Vec::with_capacity(n);
        let mut sin_beta = Vec::with_capacity(n);
        for j in 0..n {
            let beta = SphericalFunction::<T>::beta(b, j);
            let mut s = 0.0f64;
            for k in 0..b {
                s += ((2 * k + 1) as f64 * beta).sin() / (2 * k + 1) as f64;
            }
            weights.push(T::cast(2.0 / b as f64 * beta.sin() * s));
            cos_beta.push(T::cast(beta.cos()));
            sin_beta.push(T::cast(beta.sin()));
        }
        Self {
            bandwidth,
            weights,
            cos_beta,
            sin_beta,
        }
    }

    /// Forward transform: coefficients c_{l m} = integral f conj(Y_l^m) dOmega.
    pub fn forward(&self, f: &SphericalFunction<T>) -> Result<ShCoefficients<T>> {
        let b = self.bandwidth;
        if f.bandwidth != b {
            return Err(Error::BandwidthMismatch(f.bandwidth, b));
        }
        let n = 2 * b;

        // FFT over longitude: g_m(beta_j) = sum_k f(j,k) e^{-i m phi_k}
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut rows: Vec<Complex<T>> = f
            .samples
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        for row in rows.chunks_exact_mut(n) {
            fft.process(row);
        }

        let phi_weight = T::cast(std::f64::consts::PI / b as f64);
        let mut coeffs = ShCoefficients::zeros(b);
        let mut pmm = vec![T::zero(); n];
        let mut p_prev = vec![T::zero(); n];
        let mut p_curr = vec![T::zero(); n];

        for m in 0..b {
            self.seed_pmm(m, &mut pmm);
            // column of the longitude FFT holding order +m / -m
            let col_pos = m;
            let col_neg = if m == 0 { 0 } else { n - m };
            let neg_sign = if m % 2 == 0 { T::one() } else { -T::one() };

            p_prev.copy_from_slice(&pmm);
            p_curr.fill(T::zero());
            for l in m..b {
                let p: &[T] = if l == m {
                    &p_prev
                } else {
                    &p_curr
                };
                let mut acc_pos = Complex::new(T::zero(), T::zero());
                let mut acc_neg = Complex::new(T::zero(), T::zero());
                for j in 0..n {
                    let w = self.weights[j] * p[j];
                    acc_pos += rows[j * n + col_pos] * w;
                    if m > 0 {
                        acc_neg += rows[j * n + col_neg] * w;
                    }
                }
                *coeffs.at_mut(l, m as isize) = acc_pos * phi_weight;
                if m > 0 {
                    // Pbar_l^{-m} = (-1)^m Pbar_l^m
                    *coeffs.at_mut(l, -(m as isize)) = acc_neg * (phi_weight * neg_sign);
                }
                self.advance(l, m, &mut p_prev, &mut p_curr);
            }
        }
        Ok(coeffs)
    }

    /// Inverse transform: f(beta_j, phi_k) = sum_{l m} c_{l m} Y_l^m.
    pub fn inverse(&self, coeffs: &ShCoefficients<T>) -> Result<SphericalFunction<T>> {
        let b = self.bandwidth;
        if coeffs.bandwidth != b {
            return Err(Error::BandwidthMismatch(coeffs.bandwidth, b));
        }
        let n = 2 * b;
        // h_m(beta_j) accumulated per row, then inverse FFT over longitude.
        let mut rows = vec![Complex::new(T::zero(), T::zero()); n * n];
        let mut pmm = vec![T::zero(); n];
        let mut p_prev = vec![T::zero(); n];
        let mut p_curr = vec![T::zero(); n];

        for m in 0..b {
            self.seed_pmm(m, &mut pmm);
            let col_pos = m;
            let col_neg = if m == 0 { 0 } else { n - m };
            let neg_sign = if m % 2 == 0 { T::one() } else { -T::one() };
            p_prev.copy_from_slice(&pmm);
            p_curr.fill(T::zero());
            for l in m..b {
                let p: &[T] = if l == m { &p_prev } else { &p_curr };
                let c_pos = coeffs.at(l, m as isize);
                let c_neg = if m > 0 {
                    coeffs.at(l, -(m as isize)) * neg_sign
                } else {
                    Complex::new(T::zero(), T::zero())
                };
                for j in 0..n {
                    rows[j * n + col_pos] += c_pos * p[j];
                    if m > 0 {
                        rows[j * n + col_neg] += c_neg * p[j];
                    }
                }
                self.advance(l, m, &mut p_prev, &mut p_curr);
            }
        }

        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n);
        for row in rows.chunks_exact_mut(n) {
            ifft.process(row);
        }
        let mut f = SphericalFunction::zeros(b);
        for (dst, src) in f.samples.iter_mut().zip(&rows) {
            *dst = src.re;
        }
        Ok(f)
    }

    /// Sectoral seed Pbar_m^m at every colatitude row.
    fn seed_pmm(&self, m: usize, pmm: &mut [T]) {
        let n = 2 * self.bandwidth;
        if m == 0 {
            let v = T::cast(1.0 / (4.0 * std::f64::consts::PI).sqrt());
            pmm[..n].fill(v);
            return;
        }
        // Pbar_m^m = -sqrt((2m+1)/(2m)) sin(beta) Pbar_{m-1}^{m-1}
        // built from scratch each call; factors accumulated per row.
        for j in 0..n {
            let mut v = T::cast(1.0 / (4.0 * std::f64::consts::PI).sqrt());
            for k in 1..=m {
                let f = T::cast(((2 * k + 1) as f64 / (2 * k) as f64).sqrt());
                v = -f * self.sin_beta[j] * v;
            }
            pmm[j] = v;
        }
    }

    /// Step the degree recurrence from l to l+1 for fixed order m.
    /// On entry: for l == m, p_prev holds Pbar_m^m and p_curr is unused;
    /// afterwards p_curr holds Pbar_l^m and p_prev holds Pbar_{l-1}^m.
    fn advance(&self, l: usize, m: usize, p_prev: &mut [T], p_curr: &mut [T]) {
        let n = 2 * self.bandwidth;
        let l1 = l + 1;
        if l1 * l1 <= m * m {
            return;
        }
        if l == m {
            // Pbar_{m+1}^m = sqrt(2m+3) cos(beta) Pbar_m^m
            let f = T::cast(((2 * m + 3) as f64).sqrt());
            for j in 0..n {
                p_curr[j] = f * self.cos_beta[j] * p_prev[j];
            }
        } else {
            let lf = l1 as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let a = T::cast(a);
            let b = T::cast(b);
            for j in 0..n {
                let next = a * (self.cos_beta[j] * p_curr[j] - b * p_prev[j]);
                p_prev[j] = p_curr[j];
                p_curr[j] = next;
            }
        }
    }
}
