//! Gibbs-Hawkes and EM-Hawkes.
//!
//! Gibbs-Hawkes cycles through: parent probabilities under the current
//! `(mu, phi)` sample, one branching structure, the conditional posteriors of
//! `phi` and `mu`, and fresh draws from them. Its prediction is the
//! posterior mean over retained iterations.
//!
//! EM-Hawkes instead draws several structures per iteration under the
//! current MAP pair, fits the posteriors to the pooled offspring and moves
//! to the MAP `mu` and the element-wise marginal mode of `phi`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::CosineBasis;
use crate::branching::{
    parent_probabilities, sample_branching, sample_branching_direct, AlignedOffspring, TruncationPolicy,
};
use crate::error::{HawkesError, Result};
use crate::inference::{fit_kernel_posterior, mu_posterior, KernelObjective, KernelPosterior, LaplaceConfig};
use crate::process::{log_likelihood, uniform_grid, EventSequence, Kernel, ObservationWindow, Tabulated};
use crate::rng_from_seed;

pub const DEFAULT_GRID_POINTS: usize = 256;
pub const FIT_RESULT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub truncation: TruncationPolicy,
    pub basis: CosineBasis,
    pub laplace: LaplaceConfig,
    /// Structures drawn per EM iteration.
    pub em_branching_samples: usize,
    pub em_max_iters: usize,
    /// Relative change of `(mu, phi on the grid)` that stops EM.
    pub em_tolerance: f64,
    pub grid_points: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            seed: 0,
            truncation: TruncationPolicy::default(),
            basis: CosineBasis::default(),
            laplace: LaplaceConfig::default(),
            em_branching_samples: 10,
            em_max_iters: 200,
            em_tolerance: 1e-4,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(HawkesError::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.em_branching_samples == 0 {
            return Err(HawkesError::InvalidParameter(
                "EM needs at least one branching sample per iteration".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(HawkesError::InvalidParameter("prediction grid needs two points".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gibbs")]
    Gibbs,
    #[serde(rename = "em")]
    Em,
    #[serde(rename = "exp-mle")]
    ExpMle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gibbs => "gibbs",
            Method::Em => "em",
            Method::ExpMle => "exp-mle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = HawkesError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gibbs" => Ok(Method::Gibbs),
            "em" => Ok(Method::Em),
            "exp-mle" => Ok(Method::ExpMle),
            other => Err(HawkesError::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSummary {
    pub estimate: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub mu: Vec<f64>,
    /// Immigrant count of the sampled structure (the average over the
    /// sampled structures for EM).
    pub immigrants: Vec<f64>,
    /// Gibbs: log posterior of the weights at the Laplace mode for the
    /// sampled structure. EM: observed-data log-likelihood of the group
    /// under the updated estimate.
    pub objective: Vec<f64>,
}

/// Pointwise kernel summary on the prediction grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBands {
    pub mean: Vec<f64>,
    pub p10: Vec<f64>,
    pub p50: Vec<f64>,
    pub p90: Vec<f64>,
}

/// The outcome of fitting one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub version: u32,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    pub grid: Vec<f64>,
    /// Point prediction of `phi` on the grid.
    pub kernel: Vec<f64>,
    pub p10: Vec<f64>,
    pub p50: Vec<f64>,
    pub p90: Vec<f64>,
    pub mu: MuSummary,
    pub trace: Trace,
    /// Wall-clock seconds per iteration; kept out of the document so that
    /// seeded reruns serialize identically.
    #[serde(skip)]
    pub seconds_per_iteration: Vec<f64>,
}

impl FitResult {
    pub fn kernel_tabulated(&self) -> Result<Tabulated> {
        Tabulated::new(self.grid.clone(), self.kernel.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Linear-interpolated empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise mean and 10/50/90 percentiles over per-iteration curves.
pub fn predict_mean_kernel(curves: &[Vec<f64>]) -> Result<KernelBands> {
    let first = curves.first().ok_or(HawkesError::Empty("no retained iterations"))?;
    let n = first.len();
    let mut bands = KernelBands {
        mean: Vec::with_capacity(n),
        p10: Vec::with_capacity(n),
        p50: Vec::with_capacity(n),
        p90: Vec::with_capacity(n),
    };
    let mut column = Vec::with_capacity(curves.len());
    for j in 0..n {
        column.clear();
        column.extend(curves.iter().map(|c| c[j]));
        bands.mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        bands.p10.push(quantile_sorted(&column, 0.1));
        bands.p50.push(quantile_sorted(&column, 0.5));
        bands.p90.push(quantile_sorted(&column, 0.9));
    }
    Ok(bands)
}

fn summarize_samples(samples: &[f64]) -> MuSummary {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    MuSummary {
        estimate: samples.iter().sum::<f64>() / samples.len() as f64,
        p10: quantile_sorted(&sorted, 0.1),
        p50: quantile_sorted(&sorted, 0.5),
        p90: quantile_sorted(&sorted, 0.9),
    }
}

/// Shared state of a fit over one group of sequences.
struct GroupContext<'a> {
    group: &'a [EventSequence],
    basis: CosineBasis,
    integral: DMatrix<f64>,
    duration: f64,
    events: usize,
    grid: Vec<f64>,
    grid_features: Vec<Vec<f64>>,
}

impl<'a> GroupContext<'a> {
    fn new(group: &'a [EventSequence], config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let window = common_window(group)?;
        let basis = config.basis.clone();
        let integral = basis.summed_integral_matrix(group.iter().flat_map(|s| s.censor_times()));
        let grid = uniform_grid(PI, config.grid_points);
        let grid_features = grid
            .iter()
            .map(|&t| {
                let mut e = vec![0.0; basis.size()];
                basis.eval_into(t, &mut e);
                e
            })
            .collect();
        Ok(Self {
            group,
            integral,
            duration: window.length() * group.len() as f64,
            events: group.iter().map(|s| s.len()).sum(),
            basis,
            grid,
            grid_features,
        })
    }

    fn initial_mu(&self) -> f64 {
        (0.5 * self.events as f64 / self.duration).max(1.0 / self.duration)
    }

    fn objective(&self, offspring: &AlignedOffspring) -> KernelObjective {
        KernelObjective::with_integral(&self.basis, offspring, self.integral.clone())
    }

    fn gamma_means(&self, post: &KernelPosterior) -> Vec<f64> {
        self.grid_features
            .iter()
            .map(|e| post.marginal_from_features(e).mean())
            .collect()
    }
}

/// Checks that the group is nonempty and shares one window.
pub fn common_window(group: &[EventSequence]) -> Result<ObservationWindow> {
    let first = group.first().ok_or(HawkesError::Empty("fit group has no sequences"))?;
    let w = first.window();
    if group.iter().any(|s| s.window() != w) {
        return Err(HawkesError::InvalidParameter(
            "all sequences of a fit group must share one observation window".into(),
        ));
    }
    Ok(w)
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);
#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
#[cfg(target_arch = "wasm32")]
struct Stopwatch;
#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }
    fn seconds(&self) -> f64 {
        f64::NAN
    }
}

/// One Gibbs step's output, exposed for benchmarking.
pub(crate) struct GibbsState {
    pub mu: f64,
    pub phi: crate::basis::BasisKernel,
    pub mode: Option<Vec<f64>>,
}

pub(crate) fn gibbs_step<R: rand::Rng + ?Sized>(
    ctx_group: &[EventSequence],
    basis: &CosineBasis,
    integral: &DMatrix<f64>,
    duration: f64,
    config: &SamplerConfig,
    state: &mut GibbsState,
    rng: &mut R,
) -> Result<(KernelPosterior, f64)> {
    let mut offspring = AlignedOffspring::new();
    let mut immigrants = 0usize;
    for seq in ctx_group {
        let b = sample_branching_direct(seq, state.mu, &state.phi, config.truncation, rng)?;
        immigrants += b.immigrant_count();
        offspring.push_offsets(seq, &b);
        offspring.push_censors(seq);
    }
    let objective = KernelObjective::with_integral(basis, &offspring, integral.clone());
    let post = fit_kernel_posterior(&objective, basis, &config.laplace, state.mode.as_deref())?;
    let mu_post = mu_posterior(immigrants as f64, duration)?;
    state.phi = post.sample_kernel(rng);
    state.mu = mu_post.sample(rng);
    state.mode = Some(post.omega_hat().to_vec());
    Ok((post, immigrants as f64))
}

pub(crate) fn initial_gibbs_state(basis: &CosineBasis, mu: f64) -> GibbsState {
    // constant kernel 1 / (2 pi): branching ratio 1/2 over [0, pi]
    let mut w = vec![0.0; basis.size()];
    w[0] = 1.0;
    GibbsState {
        mu,
        phi: basis.kernel(w),
        mode: None,
    }
}

/// Block Gibbs sampler over branching structure, `phi` and `mu`.
pub fn gibbs_hawkes(group: &[EventSequence], config: &SamplerConfig) -> Result<FitResult> {
    let ctx = GroupContext::new(group, config)?;
    let mut rng = rng_from_seed(config.seed);
    let mut state = initial_gibbs_state(&ctx.basis, ctx.initial_mu());
    let mut trace = Trace::default();
    let mut curves = Vec::with_capacity(config.iterations - config.burn_in);
    let mut mu_kept = Vec::with_capacity(config.iterations - config.burn_in);
    let mut timings = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let clock = Stopwatch::start();
        let (post, immigrants) = gibbs_step(
            ctx.group,
            &ctx.basis,
            &ctx.integral,
            ctx.duration,
            config,
            &mut state,
            &mut rng,
        )
        .map_err(|e| e.at_iteration(it))?;
        trace.mu.push(state.mu);
        trace.immigrants.push(immigrants);
        trace.objective.push(post.objective());
        if it >= config.burn_in {
            curves.push(ctx.gamma_means(&post));
            mu_kept.push(state.mu);
        }
        timings.push(clock.seconds());
    }

    let bands = predict_mean_kernel(&curves)?;
    Ok(FitResult {
        version: FIT_RESULT_VERSION,
        method: Method::Gibbs,
        group: None,
        grid: ctx.grid,
        kernel: bands.mean,
        p10: bands.p10,
        p50: bands.p50,
        p90: bands.p90,
        mu: summarize_samples(&mu_kept),
        trace,
        seconds_per_iteration: timings,
    })
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let base: f64 = old.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / base.max(1e-12)
}

/// Stochastic EM with marginal-mode kernel updates.
pub fn em_hawkes(group: &[EventSequence], config: &SamplerConfig) -> Result<FitResult> {
    let ctx = GroupContext::new(group, config)?;
    let mut rng = rng_from_seed(config.seed);
    let samples = config.em_branching_samples;

    let mut mu = ctx.initial_mu();
    let mut phi: Box<dyn Kernel> = Box::new(initial_gibbs_state(&ctx.basis, mu).phi);
    let mut mode: Option<Vec<f64>> = None;
    let mut phi_grid: Vec<f64> = ctx.grid.iter().map(|&t| phi.eval(t)).collect();
    let mut trace = Trace::default();
    let mut timings = Vec::new();
    let mut last: Option<(KernelPosterior, f64)> = None;

    for it in 0..config.em_max_iters.max(1) {
        let clock = Stopwatch::start();
        let mut step = || -> Result<(KernelPosterior, f64)> {
            let mut offspring = AlignedOffspring::new();
            let mut immigrants = 0usize;
            let dists = ctx
                .group
                .iter()
                .map(|seq| parent_probabilities(seq, mu, phi.as_ref(), config.truncation))
                .collect::<Result<Vec<_>>>()?;
            for _ in 0..samples {
                for (seq, dist) in ctx.group.iter().zip(&dists) {
                    let b = sample_branching(dist, &mut rng);
                    immigrants += b.immigrant_count();
                    offspring.push_offsets(seq, &b);
                }
            }
            for seq in ctx.group {
                offspring.push_censors(seq);
            }
            offspring.weight = 1.0 / samples as f64;
            let objective = ctx.objective(&offspring);
            let post = fit_kernel_posterior(&objective, &ctx.basis, &config.laplace, mode.as_deref())?;
            Ok((post, immigrants as f64 / samples as f64))
        };
        let (post, immigrants) = step().map_err(|e| e.at_iteration(it))?;

        let mu_post = mu_posterior(immigrants, ctx.duration).map_err(|e| e.at_iteration(it))?;
        let new_mu = mu_post.mode().max(f64::MIN_POSITIVE);
        let new_grid: Vec<f64> = ctx
            .grid_features
            .iter()
            .map(|e| post.marginal_from_features(e).mode())
            .collect();

        let change = ((new_mu - mu).abs() / mu).max(relative_change(&new_grid, &phi_grid));
        mu = new_mu;
        phi_grid = new_grid;
        let tab = Tabulated::new(ctx.grid.clone(), phi_grid.clone())?;
        trace.mu.push(mu);
        trace.immigrants.push(immigrants);
        trace
            .objective
            .push(ctx.group.iter().map(|s| log_likelihood(mu, &tab, s)).sum());
        timings.push(clock.seconds());
        phi = Box::new(tab);
        mode = Some(post.omega_hat().to_vec());
        last = Some((post, immigrants));
        if it > 0 && change < config.em_tolerance {
            break;
        }
    }

    let (post, immigrants) = last.expect("at least one EM iteration");
    let mu_post = mu_posterior(immigrants, ctx.duration)?;
    let mu_quantile = |p: f64| {
        use statrs::distribution::{ContinuousCDF, Gamma};
        Gamma::new(mu_post.shape, mu_post.rate)
            .map(|g| g.inverse_cdf(p))
            .unwrap_or(mu)
    };
    let marginals: Vec<_> = ctx
        .grid_features
        .iter()
        .map(|e| post.marginal_from_features(e))
        .collect();
    Ok(FitResult {
        version: FIT_RESULT_VERSION,
        method: Method::Em,
        group: None,
        p10: marginals.iter().map(|m| m.quantile(0.1)).collect(),
        p50: marginals.iter().map(|m| m.quantile(0.5)).collect(),
        p90: marginals.iter().map(|m| m.quantile(0.9)).collect(),
        grid: ctx.grid,
        kernel: phi_grid,
        mu: MuSummary {
            estimate: mu,
            p10: mu_quantile(0.1),
            p50: mu_quantile(0.5),
            p90: mu_quantile(0.9),
        },
        trace,
        seconds_per_iteration: timings,
    })
}
