//! Parametric baseline: Hawkes process with `phi(t) = a1 a2 exp(-a2 t)`
//! fitted by maximum likelihood.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::optim::{minimize, LbfgsConfig};
use crate::process::{uniform_grid, EventSequence, HawkesModel, Kernel, TriggeringKernelSpec};
use crate::rng_from_seed;
use crate::samplers::{FitResult, Method, MuSummary, Trace, DEFAULT_GRID_POINTS, FIT_RESULT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpMleConfig {
    pub starts: usize,
    pub seed: u64,
    pub optimizer: LbfgsConfig,
}

impl Default for ExpMleConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 0,
            optimizer: LbfgsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpMleFit {
    pub model: HawkesModel,
    pub log_likelihood: f64,
    /// Starts that reached the gradient tolerance.
    pub converged_starts: usize,
}

impl ExpMleFit {
    pub fn params(&self) -> (f64, f64, f64) {
        match self.model.kernel {
            TriggeringKernelSpec::Exponential { a1, a2 } => (self.model.mu, a1, a2),
            _ => unreachable!("exp-MLE always yields an exponential kernel"),
        }
    }

    /// The fit as a point-mass `FitResult` (bands collapse onto the curve).
    pub fn to_fit_result(&self, grid_points: usize) -> FitResult {
        let grid = uniform_grid(std::f64::consts::PI, grid_points.max(2));
        let kernel: Vec<f64> = grid.iter().map(|&t| self.model.kernel.eval(t)).collect();
        let mu = self.model.mu;
        FitResult {
            version: FIT_RESULT_VERSION,
            method: Method::ExpMle,
            group: None,
            grid,
            p10: kernel.clone(),
            p50: kernel.clone(),
            p90: kernel.clone(),
            kernel,
            mu: MuSummary {
                estimate: mu,
                p10: mu,
                p50: mu,
                p90: mu,
            },
            trace: Trace {
                mu: vec![mu],
                immigrants: Vec::new(),
                objective: vec![self.log_likelihood],
            },
            seconds_per_iteration: Vec::new(),
        }
    }
}

/// Log-likelihood of the group and its gradient in `(mu, a1, a2)`.
///
/// `A_i = sum_{k<i} exp(-a2 (t_i - t_k))` and its `a2`-derivative `B_i`
/// are both carried by O(N) recursions.
pub fn exp_log_likelihood(group: &[EventSequence], mu: f64, a1: f64, a2: f64) -> (f64, [f64; 3]) {
    let mut ll = 0.0;
    let mut g = [0.0; 3];
    for seq in group {
        let w = seq.window();
        ll -= mu * w.length();
        g[0] -= w.length();
        let (mut a, mut b) = (0.0f64, 0.0f64);
        let mut prev: Option<f64> = None;
        for &t in seq.times() {
            if let Some(p) = prev {
                let dt = t - p;
                let decay = (-a2 * dt).exp();
                b = decay * (b - dt * (1.0 + a));
                a = decay * (1.0 + a);
            }
            prev = Some(t);
            let lambda = mu + a1 * a2 * a;
            if !(lambda > 0.0) {
                return (f64::NEG_INFINITY, [f64::NAN; 3]);
            }
            ll += lambda.ln();
            g[0] += 1.0 / lambda;
            g[1] += a2 * a / lambda;
            g[2] += a1 * (a + a2 * b) / lambda;

            let c = w.end - t;
            let tail = (-a2 * c).exp();
            ll -= a1 * (1.0 - tail);
            g[1] -= 1.0 - tail;
            g[2] -= a1 * c * tail;
        }
    }
    (ll, g)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Multi-start maximum likelihood over log-parameters.
pub fn fit_exp_mle(group: &[EventSequence], config: &ExpMleConfig) -> Result<ExpMleFit> {
    if group.is_empty() {
        return Err(HawkesError::Empty("fit group has no sequences"));
    }
    if config.starts == 0 {
        return Err(HawkesError::InvalidParameter("exp-MLE needs at least one start".into()));
    }
    let events: usize = group.iter().map(|s| s.len()).sum();
    let duration: f64 = group.iter().map(|s| s.window().length()).sum();
    let rate = (events.max(1) as f64) / duration;

    let objective = |x: &[f64], grad: &mut [f64]| -> f64 {
        let p = [x[0].exp(), x[1].exp(), x[2].exp()];
        let (ll, g) = exp_log_likelihood(group, p[0], p[1], p[2]);
        if !ll.is_finite() {
            grad.iter_mut().for_each(|v| *v = 0.0);
            return f64::INFINITY;
        }
        for k in 0..3 {
            grad[k] = -g[k] * p[k];
        }
        -ll
    };

    let mut rng = rng_from_seed(config.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_failed = f64::INFINITY;
    let mut converged = 0;
    let mut last_err = None;
    for _ in 0..config.starts {
        let x0 = [
            log_uniform(&mut rng, 0.1 * rate, 10.0 * rate).ln(),
            log_uniform(&mut rng, 0.01, 0.99).ln(),
            log_uniform(&mut rng, 0.1, 50.0).ln(),
        ];
        match minimize(objective, &x0, &config.optimizer) {
            Ok(m) => {
                converged += 1;
                if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                    best = Some((m.value, m.x));
                }
            }
            Err(e) => {
                if let HawkesError::NonConvergence { objective, .. } = &e {
                    best_failed = best_failed.min(*objective);
                }
                last_err = Some(e);
            }
        }
    }
    let (value, x) = match best {
        Some(b) => b,
        None => {
            return Err(match last_err {
                Some(HawkesError::NonConvergence { iterations, grad_norm, .. }) => HawkesError::NonConvergence {
                    iterations,
                    grad_norm,
                    objective: best_failed,
                },
                Some(e) => e,
                None => HawkesError::Empty("no optimizer starts"),
            })
        }
    };
    let model = HawkesModel::new(x[0].exp(), TriggeringKernelSpec::exponential(x[1].exp(), x[2].exp())?)?;
    Ok(ExpMleFit {
        model,
        log_likelihood: -value,
        converged_starts: converged,
    })
}

/// Convenience wrapper producing the shared result document.
pub fn fit_exp_mle_result(group: &[EventSequence], config: &ExpMleConfig) -> Result<FitResult> {
    Ok(fit_exp_mle(group, config)?.to_fit_result(DEFAULT_GRID_POINTS))
}
