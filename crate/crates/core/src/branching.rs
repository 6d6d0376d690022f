//! Parent probabilities, truncated candidate sets, branching-structure
//! sampling and alignment of offspring into Poisson sequences.
//!
//! Given `mu` and `phi`, event `i` descends from an earlier event `j` with
//! probability `phi(t_i - t_j) / lambda(t_i)` and from the background with
//! probability `mu / lambda(t_i)`. Candidates whose lag exceeds a horizon
//! that carries all but a fraction `epsilon` of the kernel mass are dropped,
//! which makes a pass over the sequence linear in its length.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::process::{EventSequence, Kernel};

pub const DEFAULT_TAIL_MASS: f64 = 1e-4;

/// Per-event parent assignment; `None` marks an immigrant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingStructure {
    parents: Vec<Option<usize>>,
}

impl BranchingStructure {
    /// Every parent must refer to a strictly earlier event.
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        for (i, p) in parents.iter().enumerate() {
            if let Some(j) = p {
                if *j >= i {
                    return Err(HawkesError::InvalidParameter(format!(
                        "event {i} cannot descend from event {j}"
                    )));
                }
            }
        }
        Ok(Self { parents })
    }

    pub fn all_immigrants(n: usize) -> Self {
        Self {
            parents: vec![None; n],
        }
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn immigrant_count(&self) -> usize {
        self.parents.iter().filter(|p| p.is_none()).count()
    }

    pub fn offspring_count(&self) -> usize {
        self.len() - self.immigrant_count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Every earlier event is a candidate parent.
    Full,
    /// Drop lags beyond the horizon that leaves tail mass `epsilon`.
    TailMass(f64),
    /// Drop lags beyond a fixed horizon.
    Horizon(f64),
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::TailMass(DEFAULT_TAIL_MASS)
    }
}

impl TruncationPolicy {
    /// Lag horizon for `phi` on sequences whose window has length `span`.
    pub fn horizon<K: Kernel + ?Sized>(&self, phi: &K, span: f64) -> f64 {
        let domain = span.min(phi.support_end());
        match *self {
            // the naive scan: every earlier event is a candidate
            TruncationPolicy::Full => span,
            TruncationPolicy::Horizon(h) => h.min(domain),
            TruncationPolicy::TailMass(eps) => truncation_horizon(phi, eps, domain),
        }
    }
}

/// Smallest `h` in `[0, domain]` with
/// `integral_h^domain phi <= epsilon * integral_0^domain phi`, by bisection
/// on the closed-form cumulative integral. Zero-mass kernels give `0`.
pub fn truncation_horizon<K: Kernel + ?Sized>(phi: &K, epsilon: f64, domain: f64) -> f64 {
    if !(domain > 0.0) {
        return 0.0;
    }
    let total = phi.cumulative(domain);
    if !(total > 0.0) {
        return 0.0;
    }
    let allowed = epsilon.max(0.0) * total;
    let tail = |h: f64| total - phi.cumulative(h);
    if tail(0.0) <= allowed {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, domain);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) <= allowed {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * domain {
            break;
        }
    }
    hi
}

/// Visits every event with its candidate parents (within `horizon`) and
/// the kernel values at the corresponding lags.
fn for_each_row<K, F>(seq: &EventSequence, mu: f64, phi: &K, horizon: f64, mut visit: F) -> Result<()>
where
    K: Kernel + ?Sized,
    F: FnMut(usize, f64, usize, &[f64]) -> Result<()>,
{
    let times = seq.times();
    let mut lags: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut lo = 0;
    for (i, &t) in times.iter().enumerate() {
        while lo < i && t - times[lo] > horizon {
            lo += 1;
        }
        lags.clear();
        lags.extend(times[lo..i].iter().map(|&s| t - s));
        weights.resize(lags.len(), 0.0);
        phi.eval_many(&lags, &mut weights);
        let denom = mu + weights.iter().sum::<f64>();
        if !(denom > 0.0) {
            return Err(HawkesError::UndefinedRow(i));
        }
        visit(i, denom, lo, &weights)?;
    }
    Ok(())
}

/// Parent probabilities for each event, stored row-compressed.
#[derive(Clone, Debug)]
pub struct ParentDistribution {
    background: Vec<f64>,
    row_start: Vec<usize>,
    first_candidate: Vec<usize>,
    probs: Vec<f64>,
}

/// One event's distribution over parents.
#[derive(Clone, Copy, Debug)]
pub struct ParentRow<'a> {
    /// Probability of descending from the background.
    pub background: f64,
    /// Index of the earliest candidate parent.
    pub first_candidate: usize,
    /// Probabilities for candidates `first_candidate..first_candidate + probs.len()`.
    pub probs: &'a [f64],
}

impl ParentRow<'_> {
    pub fn total(&self) -> f64 {
        self.background + self.probs.iter().sum::<f64>()
    }

    /// Probability that event `j` is the parent (`None` = background).
    pub fn prob_of(&self, parent: Option<usize>) -> f64 {
        match parent {
            None => self.background,
            Some(j) if j >= self.first_candidate && j < self.first_candidate + self.probs.len() => {
                self.probs[j - self.first_candidate]
            }
            Some(_) => 0.0,
        }
    }
}

impl ParentDistribution {
    pub fn len(&self) -> usize {
        self.background.len()
    }

    pub fn is_empty(&self) -> bool {
        self.background.is_empty()
    }

    pub fn row(&self, i: usize) -> ParentRow<'_> {
        ParentRow {
            background: self.background[i],
            first_candidate: self.first_candidate[i],
            probs: &self.probs[self.row_start[i]..self.row_start[i + 1]],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = ParentRow<'_>> {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Expected number of immigrants, `sum_i p_i0`.
    pub fn expected_immigrants(&self) -> f64 {
        self.background.iter().sum()
    }
}

/// Computes `p_ij` and `p_i0` for every event of `seq`.
pub fn parent_probabilities<K: Kernel + ?Sized>(
    seq: &EventSequence,
    mu: f64,
    phi: &K,
    truncation: TruncationPolicy,
) -> Result<ParentDistribution> {
    let horizon = truncation.horizon(phi, seq.window().length());
    let n = seq.len();
    let mut dist = ParentDistribution {
        background: Vec::with_capacity(n),
        row_start: Vec::with_capacity(n + 1),
        first_candidate: Vec::with_capacity(n),
        probs: Vec::new(),
    };
    dist.row_start.push(0);
    for_each_row(seq, mu, phi, horizon, |_, denom, lo, weights| {
        dist.background.push(mu / denom);
        dist.first_candidate.push(lo);
        dist.probs.extend(weights.iter().map(|w| w / denom));
        dist.row_start.push(dist.probs.len());
        Ok(())
    })?;
    Ok(dist)
}

fn draw_parent<R: Rng + ?Sized>(rng: &mut R, total: f64, background: f64, first: usize, weights: &[f64]) -> Option<usize> {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = background;
    if u < acc {
        return None;
    }
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(first + k);
        }
    }
    // rounding left u at the top of the range
    weights.iter().rposition(|w| *w > 0.0).map(|k| first + k)
}

/// Draws one parent per event independently from `dist`.
pub fn sample_branching<R: Rng + ?Sized>(dist: &ParentDistribution, rng: &mut R) -> BranchingStructure {
    let parents = dist
        .rows()
        .map(|row| draw_parent(rng, row.total(), row.background, row.first_candidate, row.probs))
        .collect();
    BranchingStructure { parents }
}

/// Computes parent probabilities row by row and samples from each row
/// immediately, using `O(N)` memory.
pub fn sample_branching_direct<K, R>(
    seq: &EventSequence,
    mu: f64,
    phi: &K,
    truncation: TruncationPolicy,
    rng: &mut R,
) -> Result<BranchingStructure>
where
    K: Kernel + ?Sized,
    R: Rng + ?Sized,
{
    let horizon = truncation.horizon(phi, seq.window().length());
    let mut parents = Vec::with_capacity(seq.len());
    for_each_row(seq, mu, phi, horizon, |_, denom, lo, weights| {
        parents.push(draw_parent(rng, denom, mu, lo, weights));
        Ok(())
    })?;
    Ok(BranchingStructure { parents })
}

/// An offspring lag together with the residual window of its parent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedOffset {
    pub lag: f64,
    pub censor: f64,
}

/// Offspring of all parents in a fit group aligned to their parents'
/// times, plus the residual window `T - t_i` of every event.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignedOffspring {
    pub offsets: Vec<AlignedOffset>,
    pub censors: Vec<f64>,
    /// Weight of each offset in the likelihood (1 for a single structure,
    /// `1/S` when pooling `S` sampled structures).
    pub weight: f64,
}

impl AlignedOffspring {
    pub fn new() -> Self {
        Self {
            offsets: Vec::new(),
            censors: Vec::new(),
            weight: 1.0,
        }
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(|o| o.lag)
    }

    /// Appends the offspring of `seq` under `structure`.
    pub fn push_offsets(&mut self, seq: &EventSequence, structure: &BranchingStructure) {
        let times = seq.times();
        let end = seq.window().end;
        for (i, p) in structure.parents().iter().enumerate() {
            if let Some(j) = *p {
                self.offsets.push(AlignedOffset {
                    lag: times[i] - times[j],
                    censor: end - times[j],
                });
            }
        }
    }

    pub fn push_censors(&mut self, seq: &EventSequence) {
        self.censors.extend(seq.censor_times());
    }
}

/// Pools aligned offspring over every `(sequence, structure)` pair of a group.
pub fn align_offspring<'a, I>(group: I) -> AlignedOffspring
where
    I: IntoIterator<Item = (&'a EventSequence, &'a BranchingStructure)>,
{
    let mut out = AlignedOffspring::new();
    for (seq, structure) in group {
        out.push_offsets(seq, structure);
        out.push_censors(seq);
    }
    out
}
