//! Accuracy metrics and the per-iteration timing harness.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branching::TruncationPolicy;
use crate::error::{HawkesError, Result};
use crate::process::{log_likelihood, simulate_hawkes, EventSequence, HawkesModel, Kernel, ObservationWindow, TriggeringKernelSpec};
use crate::quadrature::refined_simpson;
use crate::rng_from_seed;
use crate::samplers::{gibbs_step, initial_gibbs_state, FitResult, Method, SamplerConfig};

pub const L2_PANELS: usize = 1024;
pub const L2_TOLERANCE: f64 = 1e-6;
const L2_MAX_PANELS: usize = 1 << 20;

/// `(integral_window (pred - truth)^2)^(1/2)`.
pub fn l2_distance<P, T>(pred: &P, truth: &T, window: ObservationWindow) -> f64
where
    P: Kernel + ?Sized,
    T: Kernel + ?Sized,
{
    l2_distance_fn(|t| pred.eval(t), |t| truth.eval(t), window)
}

pub fn l2_distance_fn<P, T>(pred: P, truth: T, window: ObservationWindow) -> f64
where
    P: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let sq = |t: f64| {
        let d = pred(t) - truth(t);
        d * d
    };
    refined_simpson(sq, window.start, window.end, L2_PANELS, L2_TOLERANCE, L2_MAX_PANELS)
        .max(0.0)
        .sqrt()
}

/// The same distance between constant functions: `|pred - truth| sqrt(T)`.
pub fn l2_scalar(pred: f64, truth: f64, window: ObservationWindow) -> f64 {
    (pred - truth).abs() * window.length().sqrt()
}

/// Summed test log-likelihood under the fitted `(mu, phi)` divided by the
/// number of test events.
pub fn heldout_ll_per_event(fit: &FitResult, test: &[EventSequence]) -> Result<f64> {
    let kernel = fit.kernel_tabulated()?;
    let events: usize = test.iter().map(|s| s.len()).sum();
    if events == 0 {
        return Err(HawkesError::Empty("test group has no events"));
    }
    let total: f64 = test.iter().map(|s| log_likelihood(fit.mu.estimate, &kernel, s)).sum();
    Ok(total / events as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Timed iterations per repeat, after `warmup` untimed ones.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Background rate of the benchmark process.
    pub mu: f64,
    /// Branching ratio and decay of its exponential kernel.
    pub a1: f64,
    pub a2: f64,
    pub sampler: SamplerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2_000, 5_000, 10_000, 20_000],
            repeats: 3,
            iterations: 3,
            warmup: 2,
            seed: 0,
            mu: 1.0,
            a1: 0.5,
            a2: 5.0,
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub seconds_per_iter: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub truncated: Vec<BenchRow>,
    pub untruncated: Vec<BenchRow>,
}

pub const BENCH_CSV_HEADER: &str = "n,seconds_per_iter,ratio";

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut out: W) -> Result<()> {
    writeln!(out, "{BENCH_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{:.9e},{:.9e}", r.n, r.seconds_per_iter, r.ratio)?;
    }
    Ok(())
}

/// One stationary sequence per size: the window grows with the target
/// count so that event density stays fixed, `T = n (1 - a1) / mu`.
pub fn bench_sequences(config: &BenchConfig) -> Result<Vec<EventSequence>> {
    if config.sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(HawkesError::InvalidParameter("benchmark sizes must be ascending".into()));
    }
    let model = HawkesModel::new(config.mu, TriggeringKernelSpec::exponential(config.a1, config.a2)?)?;
    if config.a1 >= 1.0 {
        return Err(HawkesError::InvalidParameter("benchmark process must be subcritical".into()));
    }
    config
        .sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let window = ObservationWindow::up_to(n as f64 * (1.0 - config.a1) / config.mu)?;
            let mut rng = rng_from_seed(config.seed.wrapping_add(k as u64));
            simulate_hawkes(&model, window, crate::process::DEFAULT_CASCADE_CAP, &mut rng).map(|(s, _)| s)
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_gibbs(seq: &EventSequence, config: &BenchConfig, truncation: TruncationPolicy, repeat: usize) -> Result<f64> {
    let sampler = SamplerConfig {
        truncation,
        ..config.sampler.clone()
    };
    let basis = &sampler.basis;
    let integral = basis.summed_integral_matrix(seq.censor_times());
    let duration = seq.window().length();
    let group = std::slice::from_ref(seq);
    let mut rng = rng_from_seed(config.seed ^ (0x9e37_79b9 * (repeat as u64 + 1)));
    let mut state = initial_gibbs_state(basis, 0.5 * seq.len().max(1) as f64 / duration);
    for _ in 0..config.warmup {
        gibbs_step(group, basis, &integral, duration, &sampler, &mut state, &mut rng)?;
    }
    let start = std::time::Instant::now();
    for _ in 0..config.iterations {
        gibbs_step(group, basis, &integral, duration, &sampler, &mut state, &mut rng)?;
    }
    Ok(start.elapsed().as_secs_f64() / config.iterations as f64)
}

/// Median seconds per Gibbs iteration at each size, with the configured
/// truncation and with the full parent scan.
pub fn bench_iteration_time(method: Method, config: &BenchConfig) -> Result<BenchTable> {
    if method != Method::Gibbs {
        return Err(HawkesError::InvalidParameter(format!(
            "the benchmark times Gibbs iterations only (got {method})"
        )));
    }
    if config.repeats == 0 || config.iterations == 0 {
        return Err(HawkesError::InvalidParameter("benchmark needs repeats and iterations".into()));
    }
    let truncated_policy = match config.sampler.truncation {
        TruncationPolicy::Full => TruncationPolicy::default(),
        p => p,
    };
    let seqs = bench_sequences(config)?;
    let mut table = BenchTable {
        truncated: Vec::new(),
        untruncated: Vec::new(),
    };
    for seq in &seqs {
        for (policy, rows) in [
            (truncated_policy, &mut table.truncated),
            (TruncationPolicy::Full, &mut table.untruncated),
        ] {
            let times = (0..config.repeats)
                .map(|r| time_gibbs(seq, config, policy, r))
                .collect::<Result<Vec<_>>>()?;
            let s = median(times);
            rows.push(BenchRow {
                n: seq.len(),
                seconds_per_iter: s,
                ratio: s / seq.len().max(1) as f64,
            });
        }
    }
    Ok(table)
}
