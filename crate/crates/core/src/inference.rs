//! Conditional posteriors given a branching structure.
//!
//! The background rate gets a conjugate Gamma law. The triggering kernel
//! `phi = f^2 / 2`, `f = w^T e`, gets a Laplace approximation over the
//! basis weights: the mode `w_hat` of
//!
//! ```text
//! L(w) = sum_offsets log(1/2 (w^T e(dt))^2)
//!        - 1/2 w^T (sum_i U(T - t_i)) w
//!        - 1/2 log((2 pi)^K |Lambda|) - 1/2 w^T Lambda^-1 w
//! ```
//!
//! and the covariance `Q` from the negative Hessian at the mode.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKernel, CosineBasis};
use crate::branching::AlignedOffspring;
use crate::error::{HawkesError, Result};
use crate::optim::{self, LbfgsConfig};

/// Gamma posterior over the background rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuPosterior {
    pub shape: f64,
    pub rate: f64,
}

/// `Gamma(2 N0, 2 D)` for `N0` immigrants over total duration `D`.
///
/// The prior on `mu D` is `Gamma(N0, 1)`, so that the posterior has mean
/// `N0` and variance `N0 / 2`. With no immigrants the prior shape is
/// floored at 1, giving `Gamma(1, 2 D)`.
pub fn mu_posterior(immigrants: f64, duration: f64) -> Result<MuPosterior> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!(
            "total duration must be positive (got {duration})"
        )));
    }
    if !(immigrants >= 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "immigrant count must be nonnegative (got {immigrants})"
        )));
    }
    let shape = if immigrants > 0.0 { 2.0 * immigrants } else { 1.0 };
    Ok(MuPosterior {
        shape,
        rate: 2.0 * duration,
    })
}

impl MuPosterior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// `(shape - 1) / rate`, or 0 when `shape < 1`.
    pub fn mode(&self) -> f64 {
        gamma_mode(self.shape, self.rate)
    }

    pub fn density(&self, x: f64) -> f64 {
        gamma_density(self.shape, self.rate, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("valid gamma parameters")
            .sample(rng)
    }
}

pub(crate) fn gamma_mode(shape: f64, rate: f64) -> f64 {
    if shape >= 1.0 {
        (shape - 1.0) / rate
    } else {
        0.0
    }
}

fn gamma_density(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - statrs::function::gamma::ln_gamma(shape)).exp()
}

/// The joint log density of weights and aligned offspring, with the data
/// terms precomputed for repeated evaluation.
#[derive(Clone, Debug)]
pub struct KernelObjective {
    size: usize,
    /// Basis vectors at every offset, row-major (`offsets x K`).
    features: Vec<f64>,
    integral: DMatrix<f64>,
    prior_precision: Vec<f64>,
    weight: f64,
    log_norm: f64,
}

impl KernelObjective {
    pub fn new(basis: &CosineBasis, offspring: &AlignedOffspring) -> Self {
        let integral = basis.summed_integral_matrix(offspring.censors.iter().copied());
        Self::with_integral(basis, offspring, integral)
    }

    /// Reuses a precomputed `sum_i U(T - t_i)`; censors of a fit group do
    /// not change between iterations.
    pub fn with_integral(basis: &CosineBasis, offspring: &AlignedOffspring, integral: DMatrix<f64>) -> Self {
        let k = basis.size();
        let mut features = vec![0.0; offspring.offsets.len() * k];
        for (row, o) in features.chunks_exact_mut(k).zip(&offspring.offsets) {
            basis.eval_into(o.lag.clamp(0.0, PI), row);
        }
        let eigen = basis.eigenvalues();
        let log_det: f64 = eigen.iter().map(|l| l.ln()).sum();
        Self {
            size: k,
            features,
            integral,
            prior_precision: eigen.iter().map(|l| 1.0 / l).collect(),
            weight: offspring.weight,
            log_norm: -0.5 * (k as f64 * (2.0 * PI).ln() + log_det),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn offsets(&self) -> usize {
        self.features.len() / self.size
    }

    pub fn integral(&self) -> &DMatrix<f64> {
        &self.integral
    }

    /// Total weight of the data terms.
    pub fn data_mass(&self) -> f64 {
        self.weight * self.offsets() as f64
    }

    /// Log density at `w`; `-inf` if `w^T e(dt) = 0` at some offset.
    pub fn value(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; self.size];
        self.value_and_gradient(w, &mut g)
    }

    /// Log density at `w` with its gradient written to `grad`.
    pub fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.size;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut data = 0.0;
        for row in self.features.chunks_exact(k) {
            let z: f64 = row.iter().zip(w).map(|(e, w)| e * w).sum();
            if z == 0.0 || !z.is_finite() {
                return f64::NEG_INFINITY;
            }
            data += (0.5 * z * z).ln();
            let scale = 2.0 * self.weight / z;
            grad.iter_mut().zip(row).for_each(|(g, e)| *g += scale * e);
        }
        let mut quad = 0.0;
        for i in 0..k {
            let mut uw = 0.0;
            for j in 0..k {
                uw += self.integral[(i, j)] * w[j];
            }
            let pw = self.prior_precision[i] * w[i];
            quad += w[i] * (uw + pw);
            grad[i] -= uw + pw;
        }
        self.weight * data - 0.5 * quad + self.log_norm
    }

    /// `-d^2 L / dw dw^T` at `w`.
    pub fn negative_hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let k = self.size;
        // upper triangle, row-major
        let mut acc = vec![0.0; k * k];
        for row in self.features.chunks_exact(k) {
            let z: f64 = row.iter().zip(w).map(|(e, w)| e * w).sum();
            let s = 2.0 * self.weight / (z * z);
            for i in 0..k {
                let si = s * row[i];
                acc[i * k + i..(i + 1) * k]
                    .iter_mut()
                    .zip(&row[i..])
                    .for_each(|(a, r)| *a += si * r);
            }
        }
        DMatrix::from_fn(k, k, |i, j| {
            let data = if i <= j { acc[i * k + j] } else { acc[j * k + i] };
            let prior = if i == j { self.prior_precision[i] } else { 0.0 };
            data + self.integral[(i, j)] + prior
        })
    }

    /// Maximizer restricted to the constant basis function, in closed form:
    /// `w_0^2 = 2 W / (U_00 + 1/lambda_0)` with `W` the total data weight.
    pub fn constant_start(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.size];
        let denom = self.integral[(0, 0)] + self.prior_precision[0];
        w[0] = (2.0 * self.data_mass() / denom).sqrt();
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceConfig {
    pub optimizer: LbfgsConfig,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            optimizer: LbfgsConfig::default(),
        }
    }
}

/// Laplace approximation `N(w_hat, Q)` of the weight posterior.
#[derive(Clone, Debug)]
pub struct KernelPosterior {
    basis: CosineBasis,
    omega_hat: Vec<f64>,
    covariance: DMatrix<f64>,
    precision_chol: Cholesky<f64, Dyn>,
    objective: f64,
    grad_norm: f64,
}

impl KernelPosterior {
    /// Builds the posterior at a given mode.
    pub fn at_mode(objective: &KernelObjective, basis: &CosineBasis, omega_hat: Vec<f64>) -> Result<Self> {
        let mut g = vec![0.0; basis.size()];
        let value = objective.value_and_gradient(&omega_hat, &mut g);
        let precision = objective.negative_hessian(&omega_hat);
        Self::from_precision(basis.clone(), omega_hat, precision, value, norm(&g))
    }

    fn from_precision(
        basis: CosineBasis,
        omega_hat: Vec<f64>,
        precision: DMatrix<f64>,
        objective: f64,
        grad_norm: f64,
    ) -> Result<Self> {
        if omega_hat.iter().any(|w| !w.is_finite()) {
            return Err(HawkesError::NotPositiveDefinite("mode is not finite"));
        }
        let chol = Cholesky::new(precision).ok_or(HawkesError::NotPositiveDefinite(
            "negative Hessian at the mode",
        ))?;
        let covariance = chol.inverse();
        Ok(Self {
            basis,
            omega_hat,
            covariance,
            precision_chol: chol,
            objective,
            grad_norm,
        })
    }

    pub fn basis(&self) -> &CosineBasis {
        &self.basis
    }

    pub fn omega_hat(&self) -> &[f64] {
        &self.omega_hat
    }

    /// The covariance `Q`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Log density at the mode.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_norm
    }

    /// The plug-in kernel `(w_hat^T e)^2 / 2`.
    pub fn mode_kernel(&self) -> BasisKernel {
        self.basis.kernel(self.omega_hat.clone())
    }

    /// Marginal law of `phi(t)`.
    pub fn phi_marginal(&self, t: f64) -> Result<PhiMarginal> {
        let e = self.basis.eval(t)?;
        Ok(self.marginal_from_features(&e))
    }

    /// Marginal law of `phi` at a point with basis vector `e`.
    pub fn marginal_from_features(&self, e: &[f64]) -> PhiMarginal {
        let k = e.len();
        let nu: f64 = e.iter().zip(&self.omega_hat).map(|(a, b)| a * b).sum();
        let mut sigma2 = 0.0;
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += self.covariance[(i, j)] * e[j];
            }
            sigma2 += e[i] * acc;
        }
        PhiMarginal::new(nu, sigma2)
    }

    /// Draws weights `w ~ N(w_hat, Q)`.
    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.omega_hat.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        // Q^-1 = L L^T, so L^-T z has covariance Q
        let x = self
            .precision_chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is nonsingular");
        self.omega_hat.iter().zip(x.iter()).map(|(m, d)| m + d).collect()
    }

    /// Draws a kernel `phi = (w^T e)^2 / 2` with `w ~ N(w_hat, Q)`.
    pub fn sample_kernel<R: Rng + ?Sized>(&self, rng: &mut R) -> BasisKernel {
        self.basis.kernel(self.sample_weights(rng))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Ascent {
    x: Vec<f64>,
    value: f64,
    grad_norm: f64,
    hessian: DMatrix<f64>,
}

/// Preconditioned rounds of L-BFGS before giving up.
const PRECONDITIONED_ROUNDS: usize = 4;

/// L-BFGS in coordinates `w = x + L^-T v`, where `L L^T` is the negative
/// Hessian at `x`.
///
/// Convergence is judged by the gradient in those coordinates,
/// `|L^-1 g|`, re-evaluated with a fresh factor at the final point. The
/// raw gradient is badly scaled next to the `log z^2` barrier.
fn ascend(objective: &KernelObjective, x0: Vec<f64>, config: &LbfgsConfig) -> Result<Ascent> {
    let k = objective.size();
    let mut x = x0;
    let mut gw = vec![0.0; k];
    let mut last = (f64::NAN, f64::NAN);
    for _ in 0..PRECONDITIONED_ROUNDS {
        let hessian = objective.negative_hessian(&x);
        let chol = Cholesky::new(hessian.clone())
            .ok_or(HawkesError::NotPositiveDefinite("negative Hessian during the ascent"))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .ok_or(HawkesError::NotPositiveDefinite("negative Hessian during the ascent"))?;
        let value = objective.value_and_gradient(&x, &mut gw);
        let gnorm = (&l_inv * DVector::from_column_slice(&gw)).norm();
        last = (gnorm, value);
        if gnorm <= config.grad_tol * (1.0 + value.abs()) {
            return Ok(Ascent {
                x,
                value,
                grad_norm: gnorm,
                hessian,
            });
        }
        let base = DVector::from_column_slice(&x);
        let to_w = |v: &[f64]| &base + l_inv.tr_mul(&DVector::from_column_slice(v));
        let f = |v: &[f64], gv: &mut [f64]| {
            let w = to_w(v);
            let mut g = vec![0.0; k];
            let value = objective.value_and_gradient(w.as_slice(), &mut g);
            let proj = &l_inv * DVector::from_vec(g);
            gv.iter_mut().zip(proj.iter()).for_each(|(a, b)| *a = -b);
            -value
        };
        let m = optim::minimize(f, &vec![0.0; k], config)?;
        x = to_w(&m.x).as_slice().to_vec();
    }
    Err(HawkesError::NonConvergence {
        iterations: PRECONDITIONED_ROUNDS * config.max_iters,
        grad_norm: last.0,
        objective: last.1,
    })
}

/// Finds the Laplace approximation of the weight posterior.
///
/// The ascent starts from `start` when it is given and the objective is
/// finite there, otherwise from the best constant kernel. A failed run is
/// retried once from a shrunken start point.
pub fn fit_kernel_posterior(
    objective: &KernelObjective,
    basis: &CosineBasis,
    config: &LaplaceConfig,
    start: Option<&[f64]>,
) -> Result<KernelPosterior> {
    let constant = objective.constant_start();
    let x0 = match start {
        Some(s) if s.len() == basis.size() && objective.value(s).is_finite() => {
            if objective.value(s) >= objective.value(&constant) {
                s.to_vec()
            } else {
                constant
            }
        }
        _ => constant,
    };
    let a = match ascend(objective, x0, &config.optimizer) {
        Ok(r) => r,
        Err(first) => {
            let shrunk: Vec<f64> = objective.constant_start().iter().map(|w| 0.5 * w).collect();
            if !objective.value(&shrunk).is_finite() {
                return Err(first);
            }
            ascend(objective, shrunk, &config.optimizer)?
        }
    };
    KernelPosterior::from_precision(basis.clone(), a.x, a.hessian, a.value, a.grad_norm)
}

static SIGMA_CLAMPS: AtomicUsize = AtomicUsize::new(0);

/// Number of marginals whose variance had to be clamped (process-wide).
pub fn sigma_clamp_count() -> usize {
    SIGMA_CLAMPS.load(Ordering::Relaxed)
}

pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Gamma approximation of `phi(t) = f(t)^2 / 2` with `f(t) ~ N(nu, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiMarginal {
    pub nu: f64,
    pub sigma2: f64,
    pub shape: f64,
    pub rate: f64,
    pub clamped: bool,
}

impl PhiMarginal {
    pub fn new(nu: f64, sigma2: f64) -> Self {
        let clamped = !(sigma2 > SIGMA2_FLOOR);
        let s2 = if clamped {
            SIGMA_CLAMPS.fetch_add(1, Ordering::Relaxed);
            SIGMA2_FLOOR
        } else {
            sigma2
        };
        let n2 = nu * nu;
        let shape = (n2 + s2).powi(2) / (4.0 * n2 * s2 + 2.0 * s2 * s2);
        let rate = (n2 + s2) / (2.0 * n2 * s2 + s2 * s2);
        Self {
            nu,
            sigma2: s2,
            shape,
            rate,
            clamped,
        }
    }

    /// `(nu^2 + sigma^2) / 2`.
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn mode(&self) -> f64 {
        gamma_mode(self.shape, self.rate)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
        GammaDist::new(self.shape, self.rate)
            .map(|g| g.inverse_cdf(p))
            .unwrap_or(self.mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::AlignedOffset;

    #[test]
    fn mu_posterior_examples() {
        let p = mu_posterior(100.0, PI).unwrap();
        assert_eq!(p.shape, 200.0);
        assert!((p.rate - 2.0 * PI).abs() < 1e-15);
        assert!((p.mean() - 100.0 / PI).abs() < 1e-12);
        assert!((p.variance() - 100.0 / (2.0 * PI * PI)).abs() < 1e-12);
        let floor = mu_posterior(0.0, 2.0).unwrap();
        assert_eq!((floor.shape, floor.rate), (1.0, 4.0));
        assert!(mu_posterior(3.0, 0.0).is_err());
    }

    #[test]
    fn single_immigrant_mode() {
        // Gamma(2, 2T) has mode 1 / (2T)
        let p = mu_posterior(1.0, PI).unwrap();
        assert!((p.mode() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn prior_only_objective_peaks_at_zero() {
        let basis = CosineBasis::new(4, 0.002, 0.002, 2).unwrap();
        let obj = KernelObjective::new(&basis, &AlignedOffspring::new());
        let post = fit_kernel_posterior(&obj, &basis, &LaplaceConfig::default(), None).unwrap();
        assert!(post.omega_hat().iter().all(|w| w.abs() < 1e-12));
        // with no data Q equals the prior covariance
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(basis.eigenvalues()));
        assert!((post.covariance() - lambda).abs().max() < 1e-9);
    }

    #[test]
    fn marginal_with_zero_mean() {
        let m = PhiMarginal::new(0.0, 0.7);
        assert!((m.shape - 0.5).abs() < 1e-15);
        assert!((m.rate - 1.0 / 0.7).abs() < 1e-12);
        assert_eq!(m.mode(), 0.0);
    }

    #[test]
    fn marginal_clamps_degenerate_variance() {
        let before = sigma_clamp_count();
        let m = PhiMarginal::new(1.0, -1e-14);
        assert!(m.clamped);
        assert_eq!(m.sigma2, SIGMA2_FLOOR);
        assert!(sigma_clamp_count() > before);
        assert!(m.shape.is_finite() && m.rate.is_finite());
    }

    #[test]
    fn objective_is_neg_infinite_on_zero_latent() {
        let basis = CosineBasis::new(2, 0.002, 0.002, 2).unwrap();
        let mut off = AlignedOffspring::new();
        off.offsets.push(AlignedOffset { lag: 0.5, censor: 2.0 });
        off.censors.push(2.0);
        let obj = KernelObjective::new(&basis, &off);
        assert_eq!(obj.value(&[0.0, 0.0]), f64::NEG_INFINITY);
    }
}
