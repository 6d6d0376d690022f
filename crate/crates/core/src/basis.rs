//! Truncated cosine Mercer basis on `[0, pi]`.
//!
//! The Gaussian-process prior on `f` (with `phi = f^2 / 2`) is expanded as
//! `k(x, y) = sum_g lambda_g e_g(x) e_g(y)` with
//!
//! ```text
//! lambda_g = 1 / (a g^(2m) + b)
//! e_0(x)   = sqrt(1/pi)
//! e_g(x)   = sqrt(2/pi) cos(g x),   g >= 1
//! ```
//!
//! which is orthonormal on `[0, pi]` under Lebesgue measure.

use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::process::Kernel;

pub const DEFAULT_BASIS_SIZE: usize = 32;
pub const DEFAULT_SMOOTHNESS: f64 = 0.002;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineBasis {
    size: usize,
    a: f64,
    b: f64,
    m: u32,
}

impl Default for CosineBasis {
    fn default() -> Self {
        Self {
            size: DEFAULT_BASIS_SIZE,
            a: DEFAULT_SMOOTHNESS,
            b: DEFAULT_SMOOTHNESS,
            m: 2,
        }
    }
}

/// Normalization of `e_g`: `sqrt(1/pi)` for `g = 0`, else `sqrt(2/pi)`.
#[inline]
fn norm_of(g: usize) -> f64 {
    if g == 0 {
        FRAC_1_PI.sqrt()
    } else {
        (2.0 * FRAC_1_PI).sqrt()
    }
}

impl CosineBasis {
    pub fn new(size: usize, a: f64, b: f64, m: u32) -> Result<Self> {
        if size == 0 {
            return Err(HawkesError::InvalidParameter("basis needs at least one function".into()));
        }
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "prior smoothness parameters must be positive (a = {a}, b = {b})"
            )));
        }
        Ok(Self { size, a, b, m })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Prior variance of the weight on `e_g`.
    pub fn eigenvalue(&self, g: usize) -> f64 {
        1.0 / (self.a * (g as f64).powi(2 * self.m as i32) + self.b)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.size).map(|g| self.eigenvalue(g)).collect()
    }

    /// Basis vector `e(t)`; `t` must lie in `[0, pi]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=PI).contains(&t) {
            return Err(HawkesError::OutsideDomain(t));
        }
        let mut out = vec![0.0; self.size];
        self.eval_into(t, &mut out);
        Ok(out)
    }

    /// Writes `e(t)` into `out` without a domain check.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let c1 = t.cos();
        let (mut prev, mut cur) = (c1, 1.0); // cos(-t), cos(0)
        for (g, slot) in out.iter_mut().enumerate().take(self.size) {
            *slot = norm_of(g) * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
    }

    /// Truncated GP covariance `sum_g lambda_g e_g(x) e_g(y)`.
    pub fn gp_kernel(&self, x: f64, y: f64) -> f64 {
        let mut ex = vec![0.0; self.size];
        let mut ey = vec![0.0; self.size];
        self.eval_into(x, &mut ex);
        self.eval_into(y, &mut ey);
        (0..self.size).map(|g| self.eigenvalue(g) * ex[g] * ey[g]).sum()
    }

    /// `U_{kk'} = integral_0^upper e_k e_k' dt` in closed form.
    pub fn integral_matrix(&self, upper: f64) -> Result<DMatrix<f64>> {
        if !(upper >= 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "integration limit must be nonnegative (got {upper})"
            )));
        }
        if upper > PI * (1.0 + 1e-12) {
            return Err(HawkesError::OutsideDomain(upper));
        }
        Ok(self.summed_integral_matrix(std::iter::once(upper)))
    }

    /// `sum_i U(upper_i)`, with every limit clamped to `[0, pi]`.
    ///
    /// Entries only depend on the sums `S_m = sum_i sin(m u_i) / m` (and
    /// `S_0 = sum_i u_i`), accumulated in `O(N K)`.
    pub fn summed_integral_matrix<I: IntoIterator<Item = f64>>(&self, uppers: I) -> DMatrix<f64> {
        let k = self.size;
        let freqs = 2 * k - 1;
        let mut sums = vec![0.0; freqs];
        for u in uppers {
            let u = u.clamp(0.0, PI);
            let (s1, c1) = u.sin_cos();
            sums[0] += u;
            let (mut prev, mut cur) = (0.0, s1);
            for (m, slot) in sums.iter_mut().enumerate().skip(1) {
                *slot += cur / m as f64;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
        }
        let mut u = DMatrix::zeros(k, k);
        u[(0, 0)] = sums[0] * FRAC_1_PI;
        for g in 1..k {
            let v = SQRT_2 * FRAC_1_PI * sums[g];
            u[(g, 0)] = v;
            u[(0, g)] = v;
        }
        for g in 1..k {
            for h in g..k {
                let v = FRAC_1_PI * (sums[h - g] + sums[g + h]);
                u[(g, h)] = v;
                u[(h, g)] = v;
            }
        }
        u
    }

    /// Coefficients `c_g` of the cosine series `f(t) = sum_g c_g cos(g t)`
    /// for weights `w`.
    pub fn cosine_coefficients(&self, weights: &[f64]) -> Vec<f64> {
        weights.iter().enumerate().map(|(g, w)| w * norm_of(g)).collect()
    }

    pub fn kernel(&self, weights: Vec<f64>) -> BasisKernel {
        BasisKernel::new(self.clone(), weights)
    }
}

/// Clenshaw evaluation of `sum_g c_g cos(g t)`.
#[inline]
pub fn cosine_series(coeffs: &[f64], t: f64) -> f64 {
    let x = t.cos();
    let two_x = 2.0 * x;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs[1..].iter().rev() {
        let b0 = c + two_x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + x * b1 - b2
}

/// `phi(t) = (w^T e(t))^2 / 2` on `[0, pi]`, zero outside.
#[derive(Clone, Debug)]
pub struct BasisKernel {
    basis: CosineBasis,
    weights: Vec<f64>,
    coeffs: Vec<f64>,
}

impl BasisKernel {
    pub fn new(basis: CosineBasis, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), basis.size(), "weight vector must match basis size");
        let coeffs = basis.cosine_coefficients(&weights);
        Self {
            basis,
            weights,
            coeffs,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &CosineBasis {
        &self.basis
    }

    /// The latent function `f(t) = w^T e(t)`.
    pub fn latent(&self, t: f64) -> f64 {
        cosine_series(&self.coeffs, t)
    }
}

impl Kernel for BasisKernel {
    fn eval(&self, t: f64) -> f64 {
        if !(0.0..=PI).contains(&t) {
            return 0.0;
        }
        let f = cosine_series(&self.coeffs, t);
        0.5 * f * f
    }

    fn cumulative(&self, upper: f64) -> f64 {
        if upper <= 0.0 {
            return 0.0;
        }
        let u = self.basis.summed_integral_matrix(std::iter::once(upper));
        let w = nalgebra::DVector::from_column_slice(&self.weights);
        0.5 * (w.transpose() * u * &w)[(0, 0)]
    }

    fn sup_bound(&self, _upper: f64) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.abs()).sum();
        0.5 * s * s
    }

    fn support_end(&self) -> f64 {
        PI
    }

    fn eval_many(&self, lags: &[f64], out: &mut [f64]) {
        // four independent Clenshaw recurrences at a time
        const LANES: usize = 4;
        let mut chunks = lags.chunks_exact(LANES);
        let mut outs = out.chunks_exact_mut(LANES);
        for (ts, os) in (&mut chunks).zip(&mut outs) {
            let x: [f64; LANES] = std::array::from_fn(|l| ts[l].cos());
            let mut b1 = [0.0; LANES];
            let mut b2 = [0.0; LANES];
            for &c in self.coeffs[1..].iter().rev() {
                for l in 0..LANES {
                    let b0 = c + 2.0 * x[l] * b1[l] - b2[l];
                    b2[l] = b1[l];
                    b1[l] = b0;
                }
            }
            for l in 0..LANES {
                let f = self.coeffs[0] + x[l] * b1[l] - b2[l];
                os[l] = if (0.0..=PI).contains(&ts[l]) { 0.5 * f * f } else { 0.0 };
            }
        }
        for (o, &t) in outs.into_remainder().iter_mut().zip(chunks.remainder()) {
            *o = self.eval(t);
        }
    }
}
