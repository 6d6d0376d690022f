//! Event sequences, triggering kernels, the Hawkes intensity and
//! log-likelihood, and cluster-construction simulators.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::branching::BranchingStructure;
use crate::error::{HawkesError, Result};

/// Default cap on the number of events a single simulated sequence may hold.
pub const DEFAULT_CASCADE_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start: f64,
    pub end: f64,
}

impl ObservationWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(HawkesError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// `[0, end]`.
    pub fn up_to(end: f64) -> Result<Self> {
        Self::new(0.0, end)
    }

    /// The canonical fitting window `[0, pi]`.
    pub fn canonical() -> Self {
        Self { start: 0.0, end: PI }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    times: Vec<f64>,
    window: ObservationWindow,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, window: ObservationWindow) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            let ordered = i == 0 || t > times[i - 1];
            if !t.is_finite() || !window.contains(t) || !ordered {
                return Err(HawkesError::InvalidEvents { index: i, time: t });
            }
        }
        Ok(Self { times, window })
    }

    pub fn empty(window: ObservationWindow) -> Self {
        Self {
            times: Vec::new(),
            window,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Residual window length `end - t_i` for every event.
    pub fn censor_times(&self) -> impl Iterator<Item = f64> + '_ {
        let end = self.window.end;
        self.times.iter().map(move |t| end - t)
    }
}

/// A nonnegative triggering kernel evaluated at lags `t >= 0`.
pub trait Kernel: Send + Sync {
    /// `phi(lag)`; zero for negative lags.
    fn eval(&self, lag: f64) -> f64;

    /// `integral_0^upper phi(t) dt`.
    fn cumulative(&self, upper: f64) -> f64;

    /// An upper bound on `phi` over `[0, upper]`.
    fn sup_bound(&self, upper: f64) -> f64;

    /// Lags beyond this value have `phi = 0`.
    fn support_end(&self) -> f64 {
        f64::INFINITY
    }

    /// `out[k] = phi(lags[k])`.
    fn eval_many(&self, lags: &[f64], out: &mut [f64]) {
        for (o, &t) in out.iter_mut().zip(lags) {
            *o = self.eval(t);
        }
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, lag: f64) -> f64 {
        (**self).eval(lag)
    }
    fn eval_many(&self, lags: &[f64], out: &mut [f64]) {
        (**self).eval_many(lags, out)
    }
    fn cumulative(&self, upper: f64) -> f64 {
        (**self).cumulative(upper)
    }
    fn sup_bound(&self, upper: f64) -> f64 {
        (**self).sup_bound(upper)
    }
    fn support_end(&self) -> f64 {
        (**self).support_end()
    }
}

/// Piecewise-linear kernel on a strictly increasing grid, zero outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRepr", into = "TabulatedRepr")]
pub struct Tabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    uniform_step: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedRepr {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TabulatedRepr> for Tabulated {
    type Error = HawkesError;
    fn try_from(r: TabulatedRepr) -> Result<Self> {
        Tabulated::new(r.grid, r.values)
    }
}

impl From<Tabulated> for TabulatedRepr {
    fn from(t: Tabulated) -> Self {
        TabulatedRepr {
            grid: t.grid,
            values: t.values,
        }
    }
}

impl Tabulated {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(HawkesError::InvalidKernel(
                "tabulated kernel needs at least two grid points and one value per point".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
            return Err(HawkesError::InvalidKernel(
                "tabulated grid must be nonnegative and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(HawkesError::InvalidKernel(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..grid.len() {
            acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
            cumulative.push(acc);
        }
        let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        let uniform = grid
            .iter()
            .enumerate()
            .all(|(i, g)| (g - (grid[0] + i as f64 * step)).abs() <= 1e-12 * step.max(1.0));
        Ok(Self {
            grid,
            values,
            cumulative,
            uniform_step: uniform.then_some(step),
        })
    }

    /// Samples `f` on `points` uniform grid points covering `[0, end]`.
    pub fn from_fn<F: Fn(f64) -> f64>(end: f64, points: usize, f: F) -> Result<Self> {
        let grid = uniform_grid(end, points);
        let values = grid.iter().map(|&t| f(t).max(0.0)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index `i` with `grid[i] <= t < grid[i + 1]`, for `t` inside the grid.
    fn segment(&self, t: f64) -> usize {
        let last = self.grid.len() - 2;
        match self.uniform_step {
            Some(h) => (((t - self.grid[0]) / h) as usize).min(last),
            None => self.grid.partition_point(|g| *g <= t).saturating_sub(1).min(last),
        }
    }
}

/// `points` uniformly spaced values from 0 to `end` inclusive.
pub fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
}

impl Kernel for Tabulated {
    fn eval(&self, t: f64) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if !(t >= lo && t <= hi) {
            return 0.0;
        }
        let i = self.segment(t);
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn cumulative(&self, upper: f64) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if upper <= lo {
            return 0.0;
        }
        if upper >= hi {
            return self.cumulative[self.cumulative.len() - 1];
        }
        let i = self.segment(upper);
        let v = self.eval(upper);
        self.cumulative[i] + 0.5 * (self.values[i] + v) * (upper - self.grid[i])
    }

    fn sup_bound(&self, _upper: f64) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    fn support_end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }
}

/// The kernels used for simulation, baselines and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggeringKernelSpec {
    /// `phi = 0`; the model reduces to a homogeneous Poisson process.
    Zero,
    /// `phi(t) = a1 * a2 * exp(-a2 t)`.
    Exponential { a1: f64, a2: f64 },
    /// `phi(t) = cos(3 pi t) + 1` on `[0, 1]`, zero elsewhere.
    CosineToy,
    /// `phi(t) = 5 exp(-5 t)`.
    ExpToy,
    Tabulated(Tabulated),
}

impl TriggeringKernelSpec {
    pub fn exponential(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(HawkesError::InvalidKernel(format!(
                "exponential kernel needs a1, a2 > 0 (got {a1}, {a2})"
            )));
        }
        Ok(Self::Exponential { a1, a2 })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { a1, a2 } => Self::exponential(*a1, *a2).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// `integral_0^inf phi`, the expected number of direct offspring.
    pub fn branching_ratio(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { a1, .. } => *a1,
            Self::CosineToy | Self::ExpToy => 1.0,
            Self::Tabulated(t) => t.cumulative(f64::INFINITY),
        }
    }
}

fn cosine_toy(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        (3.0 * PI * t).cos() + 1.0
    } else {
        0.0
    }
}

impl Kernel for TriggeringKernelSpec {
    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Exponential { a1, a2 } => a1 * a2 * (-a2 * t).exp(),
            Self::CosineToy => cosine_toy(t),
            Self::ExpToy => 5.0 * (-5.0 * t).exp(),
            Self::Tabulated(tab) => tab.eval(t),
        }
    }

    fn cumulative(&self, upper: f64) -> f64 {
        if upper <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Exponential { a1, a2 } => a1 * -(-a2 * upper).exp_m1(),
            Self::CosineToy => {
                let u = upper.min(1.0);
                u + (3.0 * PI * u).sin() / (3.0 * PI)
            }
            Self::ExpToy => -(-5.0 * upper).exp_m1(),
            Self::Tabulated(tab) => tab.cumulative(upper),
        }
    }

    fn sup_bound(&self, upper: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { a1, a2 } => a1 * a2,
            Self::CosineToy => 2.0,
            Self::ExpToy => 5.0,
            Self::Tabulated(tab) => tab.sup_bound(upper),
        }
    }

    fn support_end(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::CosineToy => 1.0,
            Self::Tabulated(tab) => tab.support_end(),
            _ => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    pub mu: f64,
    pub kernel: TriggeringKernelSpec,
}

impl HawkesModel {
    pub fn new(mu: f64, kernel: TriggeringKernelSpec) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "background rate must be finite and >= 0 (got {mu})"
            )));
        }
        kernel.validate()?;
        Ok(Self { mu, kernel })
    }

    /// The exponential toy model: `mu = 10`, `phi(t) = 5 exp(-5t)`.
    pub fn exp_toy() -> Self {
        Self {
            mu: 10.0,
            kernel: TriggeringKernelSpec::ExpToy,
        }
    }

    /// The cosine toy model: `mu = 10`, `phi(t) = cos(3 pi t) + 1` on `[0, 1]`.
    pub fn cos_toy() -> Self {
        Self {
            mu: 10.0,
            kernel: TriggeringKernelSpec::CosineToy,
        }
    }
}

/// Conditional intensity `mu + sum_{t_i < t} phi(t - t_i)`.
pub fn intensity<K: Kernel>(mu: f64, kernel: &K, history: &EventSequence, t: f64) -> f64 {
    let times = history.times();
    let upto = times.partition_point(|&s| s < t);
    let reach = kernel.support_end();
    let mut lambda = mu;
    for &s in times[..upto].iter().rev() {
        let lag = t - s;
        if lag > reach {
            break;
        }
        lambda += kernel.eval(lag);
    }
    lambda
}

/// Intensity just before each event of `seq`.
pub fn event_intensities<K: Kernel>(mu: f64, kernel: &K, seq: &EventSequence) -> Vec<f64> {
    let times = seq.times();
    let reach = kernel.support_end();
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let mut lambda = mu;
        for &s in times[..i].iter().rev() {
            let lag = t - s;
            if lag > reach {
                break;
            }
            lambda += kernel.eval(lag);
        }
        out.push(lambda);
    }
    out
}

/// Intensities at events for the exponential kernel by the O(N) recursion
/// `A_i = exp(-a2 (t_i - t_{i-1})) (1 + A_{i-1})`.
pub fn exp_event_intensities(mu: f64, a1: f64, a2: f64, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            acc = (-a2 * (t - times[i - 1])).exp() * (1.0 + acc);
        }
        out.push(mu + a1 * a2 * acc);
    }
    out
}

/// `integral_window lambda(t) dt` with the kernel part in closed form.
pub fn compensator<K: Kernel>(mu: f64, kernel: &K, seq: &EventSequence) -> f64 {
    let w = seq.window();
    mu * w.length() + seq.censor_times().map(|c| kernel.cumulative(c)).sum::<f64>()
}

/// Hawkes log-likelihood `sum_i log lambda(t_i) - integral lambda`.
///
/// Returns `-inf` when the intensity vanishes at an event.
pub fn log_likelihood<K: Kernel>(mu: f64, kernel: &K, seq: &EventSequence) -> f64 {
    let lambdas = event_intensities(mu, kernel, seq);
    log_likelihood_from(&lambdas, compensator(mu, kernel, seq))
}

pub(crate) fn log_likelihood_from(lambdas: &[f64], compensator: f64) -> f64 {
    let mut ll = -compensator;
    for &l in lambdas {
        if !(l > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll += l.ln();
    }
    ll
}

impl HawkesModel {
    pub fn intensity(&self, history: &EventSequence, t: f64) -> f64 {
        intensity(self.mu, &self.kernel, history, t)
    }

    pub fn log_likelihood(&self, seq: &EventSequence) -> f64 {
        match self.kernel {
            TriggeringKernelSpec::Exponential { a1, a2 } => {
                let lambdas = exp_event_intensities(self.mu, a1, a2, seq.times());
                log_likelihood_from(&lambdas, compensator(self.mu, &self.kernel, seq))
            }
            _ => log_likelihood(self.mu, &self.kernel, seq),
        }
    }
}

/// Thinning simulation of an inhomogeneous Poisson process on `window`.
///
/// `bound` must dominate `rate` over the window; a violation observed at a
/// candidate point is reported as an error.
pub fn simulate_poisson<R, F>(
    rate: F,
    bound: f64,
    window: ObservationWindow,
    rng: &mut R,
) -> Result<EventSequence>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let times = poisson_times(&rate, bound, window.start, window.end, rng)?;
    Ok(EventSequence { times, window })
}

fn poisson_times<R, F>(rate: &F, bound: f64, start: f64, end: f64, rng: &mut R) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!(
            "dominating bound must be finite and >= 0 (got {bound})"
        )));
    }
    let mut times = Vec::new();
    if bound == 0.0 {
        return Ok(times);
    }
    let gaps = Exp::new(bound).expect("positive rate");
    let mut t = start;
    loop {
        t += gaps.sample(rng);
        if t > end {
            break;
        }
        let r = rate(t);
        if r > bound * (1.0 + 1e-12) {
            return Err(HawkesError::BoundViolated { bound, rate: r, at: t });
        }
        let u: f64 = rng.random();
        if u * bound < r {
            times.push(t);
        }
    }
    Ok(times)
}

/// Simulates a Hawkes process by the cluster construction: immigrants from
/// `PP(mu)`, then every event spawns offspring from `PP(phi(. - t_i))`
/// truncated to the window. Returns the merged sequence and the true
/// branching structure.
pub fn simulate_hawkes<R: Rng + ?Sized>(
    model: &HawkesModel,
    window: ObservationWindow,
    cap: usize,
    rng: &mut R,
) -> Result<(EventSequence, BranchingStructure)> {
    model.kernel.validate()?;
    let mu = model.mu;
    let immigrants = poisson_times(&|_| mu, mu, window.start, window.end, rng)?;
    if immigrants.len() > cap {
        return Err(HawkesError::CascadeTooLarge { cap });
    }

    // (time, parent in generation order)
    let mut events: Vec<(f64, Option<usize>)> = immigrants.into_iter().map(|t| (t, None)).collect();
    let mut queue: VecDeque<usize> = (0..events.len()).collect();
    let kernel = &model.kernel;
    while let Some(p) = queue.pop_front() {
        let origin = events[p].0;
        let span = window.end - origin;
        let reach = span.min(kernel.support_end());
        if reach <= 0.0 {
            continue;
        }
        let bound = kernel.sup_bound(reach);
        let lags = poisson_times(&|s| kernel.eval(s), bound, 0.0, reach, rng)?;
        for lag in lags {
            events.push((origin + lag, Some(p)));
            queue.push_back(events.len() - 1);
            if events.len() > cap {
                return Err(HawkesError::CascadeTooLarge { cap });
            }
        }
    }

    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| events[a].0.total_cmp(&events[b].0).then(a.cmp(&b)));
    let mut rank = vec![0usize; events.len()];
    for (r, &g) in order.iter().enumerate() {
        rank[g] = r;
    }
    let mut times = Vec::with_capacity(events.len());
    let mut parents = Vec::with_capacity(events.len());
    for &g in &order {
        let mut t = events[g].0;
        if let Some(&prev) = times.last() {
            if t <= prev {
                // coincident floats: keep the sequence strictly increasing
                t = f64::from_bits(f64::to_bits(prev) + 1);
            }
        }
        times.push(t.min(window.end));
        parents.push(events[g].1.map(|p| rank[p]));
    }
    let seq = EventSequence::new(times, window)?;
    Ok((seq, BranchingStructure::new(parents)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn intensity_examples() {
        let w = ObservationWindow::canonical();
        let empty = EventSequence::empty(w);
        assert_eq!(intensity(10.0, &TriggeringKernelSpec::ExpToy, &empty, 1.3), 10.0);

        let one = EventSequence::new(vec![0.0], w).unwrap();
        let at = intensity(10.0, &TriggeringKernelSpec::ExpToy, &one, 1e-300);
        assert!((at - 15.0).abs() < 1e-12);
        // the event itself is excluded at its own time
        assert_eq!(intensity(10.0, &TriggeringKernelSpec::ExpToy, &one, 0.0), 10.0);

        let two = EventSequence::new(vec![0.2, 0.5], w).unwrap();
        let got = intensity(10.0, &TriggeringKernelSpec::CosineToy, &two, 0.7);
        let expected = 10.0 + ((3.0 * PI * 0.5).cos() + 1.0) + ((3.0 * PI * 0.2).cos() + 1.0);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_pure_poisson() {
        let w = ObservationWindow::canonical();
        let ll = log_likelihood(10.0, &TriggeringKernelSpec::Zero, &EventSequence::empty(w));
        assert!((ll + 10.0 * PI).abs() < 1e-12);
        let seq = EventSequence::new(vec![1.0], w).unwrap();
        let ll = log_likelihood(10.0, &TriggeringKernelSpec::Zero, &seq);
        assert!((ll - (10f64.ln() - 10.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_sentinel_on_zero_intensity() {
        let w = ObservationWindow::canonical();
        let seq = EventSequence::new(vec![0.5, 0.7], w).unwrap();
        assert_eq!(
            log_likelihood(0.0, &TriggeringKernelSpec::ExpToy, &seq),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn rejects_bad_sequences() {
        let w = ObservationWindow::canonical();
        assert!(EventSequence::new(vec![0.5, 0.5], w).is_err());
        assert!(EventSequence::new(vec![-0.1], w).is_err());
        assert!(EventSequence::new(vec![4.0], w).is_err());
        assert!(ObservationWindow::new(1.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let t = Tabulated::new(vec![0.0, 1.0, 2.0], vec![2.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(1.5), 0.5);
        assert_eq!(t.eval(2.5), 0.0);
        assert_eq!(t.eval(-0.1), 0.0);
        assert!((t.cumulative(2.0) - 1.5).abs() < 1e-15);
        assert!((t.cumulative(0.5) - 0.75).abs() < 1e-15);
        assert!(Tabulated::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Tabulated::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn poisson_thinning_edge_cases() {
        let mut rng = rng_from_seed(1);
        let w = ObservationWindow::canonical();
        let s = simulate_poisson(|_| 0.0, 0.0, w, &mut rng).unwrap();
        assert!(s.is_empty());
        let err = simulate_poisson(|_| 3.0, 1.0, w, &mut rng).unwrap_err();
        assert!(matches!(err, HawkesError::BoundViolated { .. }));
    }

    #[test]
    fn hawkes_without_background_is_empty() {
        let mut rng = rng_from_seed(3);
        let model = HawkesModel::new(0.0, TriggeringKernelSpec::ExpToy).unwrap();
        let (s, b) = simulate_hawkes(&model, ObservationWindow::canonical(), 1000, &mut rng).unwrap();
        assert!(s.is_empty());
        assert_eq!(b.len(), 0);
    }

    #[test]
    fn cascade_guard_trips() {
        let mut rng = rng_from_seed(3);
        let model = HawkesModel::new(10.0, TriggeringKernelSpec::exponential(3.0, 5.0).unwrap()).unwrap();
        let err = simulate_hawkes(&model, ObservationWindow::up_to(20.0).unwrap(), 500, &mut rng)
            .unwrap_err();
        assert!(matches!(err, HawkesError::CascadeTooLarge { cap: 500 }));
    }
}
