//! Cascade corpora: parsing, rescaling to `[0, pi]` and bundling into fit
//! groups.
//!
//! File format (UTF-8):
//!
//! ```text
//! # T=3.141592653589793
//! 0 1.5 3.2
//! 0.25 0.3|politics
//! ```
//!
//! An optional `# T=<float>` header gives the observation horizon of every
//! cascade. Each other line is one cascade: strictly increasing,
//! nonnegative, space-separated times with an optional trailing
//! `|<category>`. Lines starting with `#` that are not the horizon header
//! are comments.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::process::{simulate_hawkes, EventSequence, HawkesModel, ObservationWindow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CascadeCorpus {
    /// Observation horizon shared by every cascade, from the `# T=` header.
    pub horizon: Option<f64>,
    pub cascades: Vec<Cascade>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

/// What happened to every line of an input file.
///
/// `accepted + rejected.len() + headers == lines`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub accepted: usize,
    /// Horizon header and comment lines.
    pub headers: usize,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

fn parse_cascade(line: &str, horizon: Option<f64>) -> std::result::Result<Cascade, String> {
    let (body, category) = match line.split_once('|') {
        Some((b, c)) => {
            let c = c.trim();
            if c.is_empty() {
                return Err("empty category label".into());
            }
            (b, Some(c.to_string()))
        }
        None => (line, None),
    };
    let mut times = Vec::new();
    for tok in body.split_whitespace() {
        let t: f64 = tok.parse().map_err(|_| format!("`{tok}` is not a number"))?;
        if !t.is_finite() {
            return Err(format!("non-finite timestamp `{tok}`"));
        }
        if t < 0.0 {
            return Err(format!("negative timestamp {t}"));
        }
        if let Some(&last) = times.last() {
            if t <= last {
                return Err(format!("timestamps not strictly increasing ({last} then {t})"));
            }
        }
        if let Some(h) = horizon {
            if t > h {
                return Err(format!("timestamp {t} beyond horizon {h}"));
            }
        }
        times.push(t);
    }
    if times.is_empty() {
        return Err("empty cascade".into());
    }
    Ok(Cascade { times, category })
}

/// Parses corpus text; bad lines are reported, never fatal.
pub fn parse_corpus(text: &str) -> (CascadeCorpus, LoadReport) {
    let mut corpus = CascadeCorpus::default();
    let mut report = LoadReport::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        report.lines += 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(value) = rest.strip_prefix("T=") {
                let reject = |reason: String| Rejection { line: line_no, reason };
                if corpus.horizon.is_some() {
                    report.rejected.push(reject("duplicate horizon header".into()));
                } else if !corpus.cascades.is_empty() || !report.rejected.is_empty() {
                    report.rejected.push(reject("horizon header after the first cascade".into()));
                } else {
                    match value.trim().parse::<f64>() {
                        Ok(h) if h > 0.0 && h.is_finite() => {
                            corpus.horizon = Some(h);
                            report.headers += 1;
                        }
                        _ => report.rejected.push(reject(format!("invalid horizon `{}`", value.trim()))),
                    }
                }
            } else {
                report.headers += 1;
            }
            continue;
        }
        match parse_cascade(line, corpus.horizon) {
            Ok(c) => {
                corpus.cascades.push(c);
                report.accepted += 1;
            }
            Err(reason) => report.rejected.push(Rejection { line: line_no, reason }),
        }
    }
    if corpus.cascades.is_empty() {
        report.warnings.push("corpus contains no cascades".into());
    }
    (corpus, report)
}

pub fn load_corpus(path: &Path) -> Result<(CascadeCorpus, LoadReport)> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_corpus(&text))
}

impl CascadeCorpus {
    /// Corpus of simulated sequences sharing one window starting at 0.
    pub fn from_sequences(seqs: &[EventSequence]) -> Result<Self> {
        let first = seqs.first().ok_or(HawkesError::Empty("no sequences"))?;
        let window = first.window();
        if window.start != 0.0 || seqs.iter().any(|s| s.window() != window) {
            return Err(HawkesError::InvalidParameter(
                "corpus sequences must share one window starting at 0".into(),
            ));
        }
        if let Some(i) = seqs.iter().position(|s| s.is_empty()) {
            return Err(HawkesError::InvalidParameter(format!("sequence {i} is empty")));
        }
        Ok(Self {
            horizon: Some(window.end),
            cascades: seqs
                .iter()
                .map(|s| Cascade {
                    times: s.times().to_vec(),
                    category: None,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    /// Text form; floats use shortest round-trip formatting.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        if let Some(h) = self.horizon {
            writeln!(out, "# T={h}").expect("writing to a String");
        }
        for (i, c) in self.cascades.iter().enumerate() {
            if c.times.is_empty() {
                return Err(HawkesError::InvalidParameter(format!("cascade {i} is empty")));
            }
            let line: Vec<String> = c.times.iter().map(|t| t.to_string()).collect();
            out.push_str(&line.join(" "));
            if let Some(cat) = &c.category {
                if cat.contains(['|', '\n', '\r']) || cat.trim() != cat || cat.is_empty() {
                    return Err(HawkesError::InvalidParameter(format!("category `{cat}` cannot be written")));
                }
                out.push('|');
                out.push_str(cat);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }
}

/// Which time is sent to `pi` when rescaling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescaleAnchor {
    /// First event to 0, last event to `pi`.
    #[default]
    LastEvent,
    /// Time 0 to 0 and the corpus horizon to `pi`.
    Horizon,
}

/// Affine map of a cascade onto the window `[0, pi]`.
pub fn rescale_to_pi(times: &[f64], anchor: RescaleAnchor, horizon: Option<f64>) -> Result<EventSequence> {
    let first = *times.first().ok_or(HawkesError::Empty("cascade has no events"))?;
    let last = *times.last().expect("nonempty");
    let (lo, hi) = match anchor {
        RescaleAnchor::LastEvent => (first, last),
        RescaleAnchor::Horizon => {
            let h = horizon.ok_or_else(|| {
                HawkesError::InvalidParameter("horizon anchor needs a `# T=` header".into())
            })?;
            (0.0, h)
        }
    };
    if !(hi > lo) {
        return Err(HawkesError::InvalidParameter(format!(
            "cascade has zero duration ({lo} to {hi})"
        )));
    }
    let scale = PI / (hi - lo);
    let mut out: Vec<f64> = times.iter().map(|&t| ((t - lo) * scale).clamp(0.0, PI)).collect();
    if anchor == RescaleAnchor::LastEvent {
        *out.last_mut().expect("nonempty") = PI;
    }
    EventSequence::new(out, ObservationWindow::canonical())
}

/// Rescales every cascade, collecting per-cascade failures.
pub fn rescale_corpus(corpus: &CascadeCorpus, anchor: RescaleAnchor) -> (Vec<EventSequence>, Vec<(usize, HawkesError)>) {
    let mut ok = Vec::with_capacity(corpus.len());
    let mut failed = Vec::new();
    for (i, c) in corpus.cascades.iter().enumerate() {
        match rescale_to_pi(&c.times, anchor, corpus.horizon) {
            Ok(s) => ok.push(s),
            Err(e) => failed.push((i, e)),
        }
    }
    (ok, failed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    /// Sort by event count, then chunk.
    #[default]
    BySize,
    /// Chunk in file order.
    InOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitGroup {
    /// Index among the groups of the same role.
    pub index: usize,
    pub role: Role,
    /// Positions of the members in the bundled input.
    pub members: Vec<usize>,
    pub sequences: Vec<EventSequence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub group_size: usize,
    pub similarity: Similarity,
    /// Probability that a cascade goes to training.
    pub split_prob: f64,
    pub seed: u64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            group_size: 30,
            similarity: Similarity::BySize,
            split_prob: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub groups: Vec<FitGroup>,
    /// Inputs left over after chunking.
    pub dropped: Vec<usize>,
}

impl Bundle {
    pub fn of_role(&self, role: Role) -> impl Iterator<Item = &FitGroup> {
        self.groups.iter().filter(move |g| g.role == role)
    }
}

/// Splits into train/test, then chunks each role into fixed-size groups.
pub fn bundle(seqs: &[EventSequence], config: &BundleConfig) -> Result<Bundle> {
    if config.group_size == 0 {
        return Err(HawkesError::InvalidParameter("group size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.split_prob) {
        return Err(HawkesError::InvalidParameter(format!(
            "split probability must lie in [0, 1] (got {})",
            config.split_prob
        )));
    }
    let mut rng = crate::rng_from_seed(config.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..seqs.len() {
        if rng.random::<f64>() < config.split_prob {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    let mut out = Bundle::default();
    for (role, mut members) in [(Role::Train, train), (Role::Test, test)] {
        if config.similarity == Similarity::BySize {
            members.sort_by_key(|&i| seqs[i].len());
        }
        let full = members.len() / config.group_size * config.group_size;
        out.dropped.extend_from_slice(&members[full..]);
        for (index, chunk) in members[..full].chunks(config.group_size).enumerate() {
            out.groups.push(FitGroup {
                index,
                role,
                members: chunk.to_vec(),
                sequences: chunk.iter().map(|&i| seqs[i].clone()).collect(),
            });
        }
    }
    out.dropped.sort_unstable();
    Ok(out)
}

/// `count` independent sequences of `model` on `window`.
pub fn simulate_sequences<R: Rng + ?Sized>(
    model: &HawkesModel,
    window: ObservationWindow,
    count: usize,
    cap: usize,
    rng: &mut R,
) -> Result<Vec<EventSequence>> {
    (0..count)
        .map(|_| simulate_hawkes(model, window, cap, rng).map(|(s, _)| s))
        .collect()
}
