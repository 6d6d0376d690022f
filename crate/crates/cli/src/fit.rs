use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use hawkes_core::baseline::{fit_exp_mle, ExpMleConfig};
use hawkes_core::basis::CosineBasis;
use hawkes_core::branching::TruncationPolicy;
use hawkes_core::data::{
    bundle, load_corpus, rescale_corpus, BundleConfig, FitGroup, RescaleAnchor, Role, Similarity,
};
use hawkes_core::samplers::{em_hawkes, gibbs_hawkes, FitResult, Method, SamplerConfig, DEFAULT_GRID_POINTS};
use hawkes_core::HawkesError;
use serde::{Deserialize, Serialize};

use crate::config::{FitSection, RunConfig};
use crate::error::CliError;
use crate::output::write_atomic;
use crate::Globals;

#[derive(Debug, Default, clap::Args)]
pub struct Args {
    /// gibbs, em or exp-mle.
    #[arg(long)]
    method: Option<String>,
    /// Corpus file.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Probability that a sequence is used for training.
    #[arg(long)]
    split_prob: Option<f64>,
    /// by-size or in-order.
    #[arg(long)]
    similarity: Option<String>,
    /// last-event or horizon.
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Number of cosine basis functions K.
    #[arg(long)]
    basis_size: Option<usize>,
    /// Prior smoothness a.
    #[arg(long)]
    a: Option<f64>,
    /// Prior smoothness b.
    #[arg(long)]
    b: Option<f64>,
    /// Tail mass dropped by parent truncation; 0 scans the full history.
    #[arg(long)]
    truncation_eps: Option<f64>,
    #[arg(long)]
    em_branching_samples: Option<usize>,
    #[arg(long)]
    em_max_iters: Option<usize>,
    #[arg(long)]
    em_tolerance: Option<f64>,
    /// Optimizer starts for exp-mle.
    #[arg(long)]
    starts: Option<usize>,
}

/// Record of a fit run, read back by `evaluate`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitManifest {
    pub method: Method,
    pub corpus: PathBuf,
    pub anchor: RescaleAnchor,
    pub bundle: BundleConfig,
    pub groups: Vec<GroupEntry>,
    pub dropped: Vec<usize>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroupEntry {
    pub index: usize,
    pub role: Role,
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Failure {
    pub index: usize,
    pub error: String,
}

pub fn manifest_name(method: Method) -> String {
    format!("{method}-manifest.json")
}

fn fit_name(method: Method, index: usize) -> String {
    format!("{method}-g{index:03}.json")
}

fn parse_choice<T: for<'de> Deserialize<'de>>(flag: &str, value: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for --{flag}")))
}

struct Plan {
    method: Method,
    input: PathBuf,
    output_dir: PathBuf,
    anchor: RescaleAnchor,
    bundle: BundleConfig,
    sampler: SamplerConfig,
    exp: ExpMleConfig,
}

fn plan(args: Args, c: &FitSection, globals: &Globals) -> Result<Plan, CliError> {
    let method: Method = args
        .method
        .or_else(|| c.method.clone())
        .unwrap_or_else(|| "gibbs".into())
        .parse()
        .map_err(|e: HawkesError| CliError::Usage(e.to_string()))?;
    let input = args
        .input
        .or_else(|| c.input.clone())
        .ok_or_else(|| CliError::Usage("fit needs --input".into()))?;
    let output_dir = args
        .output_dir
        .or_else(|| c.output_dir.clone())
        .ok_or_else(|| CliError::Usage("fit needs --output-dir".into()))?;
    let similarity: Similarity = match args.similarity.or_else(|| c.similarity.clone()) {
        Some(s) => parse_choice("similarity", &s)?,
        None => Similarity::default(),
    };
    let anchor: RescaleAnchor = match args.anchor.or_else(|| c.anchor.clone()) {
        Some(s) => parse_choice("anchor", &s)?,
        None => RescaleAnchor::default(),
    };
    let bundle = BundleConfig {
        group_size: args.group_size.or(c.group_size).unwrap_or(10),
        similarity,
        split_prob: args.split_prob.or(c.split_prob).unwrap_or(0.5),
        seed: globals.seed,
    };

    let sampler_only = [
        ("iterations", args.iterations.is_some() || c.iterations.is_some()),
        ("burn-in", args.burn_in.is_some() || c.burn_in.is_some()),
        ("basis-size", args.basis_size.is_some() || c.basis_size.is_some()),
        ("a", args.a.is_some() || c.a.is_some()),
        ("b", args.b.is_some() || c.b.is_some()),
        ("truncation-eps", args.truncation_eps.is_some() || c.truncation_eps.is_some()),
        (
            "em-branching-samples",
            args.em_branching_samples.is_some() || c.em_branching_samples.is_some(),
        ),
        ("em-max-iters", args.em_max_iters.is_some() || c.em_max_iters.is_some()),
        ("em-tolerance", args.em_tolerance.is_some() || c.em_tolerance.is_some()),
    ];
    if method == Method::ExpMle {
        let ignored: Vec<&str> = sampler_only.iter().filter(|(_, set)| *set).map(|(n, _)| *n).collect();
        if !ignored.is_empty() {
            log::warn!("exp-mle ignores sampler settings: {}", ignored.join(", "));
        }
    } else if args.starts.is_some() || c.starts.is_some() {
        log::warn!("--starts only applies to exp-mle; ignored");
    }

    let defaults = SamplerConfig::default();
    let basis = CosineBasis::new(
        args.basis_size.or(c.basis_size).unwrap_or(defaults.basis.size()),
        args.a.or(c.a).unwrap_or(defaults.basis.a()),
        args.b.or(c.b).unwrap_or(defaults.basis.b()),
        defaults.basis.m(),
    )?;
    let truncation = match args.truncation_eps.or(c.truncation_eps) {
        Some(e) if e == 0.0 => TruncationPolicy::Full,
        Some(e) if e > 0.0 && e < 1.0 => TruncationPolicy::TailMass(e),
        Some(e) => return Err(CliError::Usage(format!("--truncation-eps must lie in [0, 1) (got {e})"))),
        None => defaults.truncation,
    };
    let sampler = SamplerConfig {
        iterations: args.iterations.or(c.iterations).unwrap_or(defaults.iterations),
        burn_in: args.burn_in.or(c.burn_in).unwrap_or(defaults.burn_in),
        seed: globals.seed,
        truncation,
        basis,
        em_branching_samples: args
            .em_branching_samples
            .or(c.em_branching_samples)
            .unwrap_or(defaults.em_branching_samples),
        em_max_iters: args.em_max_iters.or(c.em_max_iters).unwrap_or(defaults.em_max_iters),
        em_tolerance: args.em_tolerance.or(c.em_tolerance).unwrap_or(defaults.em_tolerance),
        ..defaults
    };
    if method != Method::ExpMle {
        sampler.validate()?;
    }
    let exp = ExpMleConfig {
        starts: args.starts.or(c.starts).unwrap_or(5),
        seed: globals.seed,
        ..Default::default()
    };
    Ok(Plan {
        method,
        input,
        output_dir,
        anchor,
        bundle,
        sampler,
        exp,
    })
}

fn fit_one(plan: &Plan, group: &FitGroup, seed: u64) -> Result<FitResult, HawkesError> {
    let mut result = match plan.method {
        Method::Gibbs => gibbs_hawkes(
            &group.sequences,
            &SamplerConfig {
                seed,
                ..plan.sampler.clone()
            },
        )?,
        Method::Em => em_hawkes(
            &group.sequences,
            &SamplerConfig {
                seed,
                ..plan.sampler.clone()
            },
        )?,
        Method::ExpMle => fit_exp_mle(
            &group.sequences,
            &ExpMleConfig {
                seed,
                ..plan.exp.clone()
            },
        )?
        .to_fit_result(DEFAULT_GRID_POINTS),
    };
    result.group = Some(group.index);
    Ok(result)
}

fn write_fit(dir: &Path, method: Method, index: usize, fit: &FitResult) -> Result<String, CliError> {
    let name = fit_name(method, index);
    let mut json = fit.to_json()?;
    json.push('\n');
    write_atomic(&dir.join(&name), json.as_bytes())?;
    let mut timings = String::from("iteration,seconds\n");
    for (i, s) in fit.seconds_per_iteration.iter().enumerate() {
        let _ = writeln!(timings, "{i},{s:.6e}");
    }
    write_atomic(&dir.join(name.replace(".json", ".timings.csv")), timings.as_bytes())?;
    Ok(name)
}

pub fn run(args: Args, config: &RunConfig, globals: &Globals) -> Result<(), CliError> {
    let plan = plan(args, &config.fit, globals)?;
    let (corpus, report) = load_corpus(&plan.input)?;
    for w in &report.warnings {
        log::warn!("{}: {w}", plan.input.display());
    }
    for r in &report.rejected {
        log::warn!("{}:{}: {}", plan.input.display(), r.line, r.reason);
    }
    let (seqs, failed) = rescale_corpus(&corpus, plan.anchor);
    for (i, e) in &failed {
        log::warn!("cascade {i} not rescaled: {e}");
    }
    let bundled = bundle(&seqs, &plan.bundle)?;
    if !bundled.dropped.is_empty() {
        log::info!("{} sequences left over after grouping", bundled.dropped.len());
    }
    let train: Vec<&FitGroup> = bundled.of_role(Role::Train).collect();
    if train.is_empty() {
        log::warn!("no complete training group; nothing to fit");
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<String, CliError>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..globals.jobs.min(train.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(group) = train.get(k) else { break };
                let seed = globals.seed.wrapping_add(group.index as u64);
                let start = std::time::Instant::now();
                let outcome = fit_one(&plan, group, seed)
                    .map_err(CliError::from)
                    .and_then(|fit| write_fit(&plan.output_dir, plan.method, group.index, &fit));
                match &outcome {
                    Ok(name) => log::info!(
                        "group {}: {} fit in {:.1}s -> {name}",
                        group.index,
                        plan.method,
                        start.elapsed().as_secs_f64()
                    ),
                    Err(e) => log::error!("group {}: {e}", group.index),
                }
                results.lock().expect("no poisoned workers").push((group.index, outcome));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned workers");
    results.sort_by_key(|(i, _)| *i);

    let mut files = std::collections::HashMap::new();
    let mut failures = Vec::new();
    let mut worst: Option<CliError> = None;
    for (index, r) in results {
        match r {
            Ok(name) => {
                files.insert(index, name);
            }
            Err(e) => {
                failures.push(Failure {
                    index,
                    error: e.to_string(),
                });
                if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
            }
        }
    }
    let corpus_path = std::fs::canonicalize(&plan.input).unwrap_or(plan.input.clone());
    let manifest = FitManifest {
        method: plan.method,
        corpus: corpus_path,
        anchor: plan.anchor,
        bundle: plan.bundle.clone(),
        groups: bundled
            .groups
            .iter()
            .map(|g| GroupEntry {
                index: g.index,
                role: g.role,
                members: g.members.clone(),
                file: (g.role == Role::Train).then(|| files.get(&g.index).cloned()).flatten(),
            })
            .collect(),
        dropped: bundled.dropped.clone(),
        failures,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_atomic(&plan.output_dir.join(manifest_name(plan.method)), json.as_bytes())?;
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
