use std::f64::consts::PI;
use std::path::PathBuf;

use hawkes_core::data::{simulate_sequences, CascadeCorpus};
use hawkes_core::process::{HawkesModel, ObservationWindow, DEFAULT_CASCADE_CAP};
use hawkes_core::rng_from_seed;
use serde::Serialize;

use crate::config::{ModelSection, RunConfig};
use crate::error::CliError;
use crate::output::write_atomic;
use crate::{truth, Globals};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// exp, cos, poisson or custom.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    /// Branching ratio of the custom exponential kernel.
    #[arg(long)]
    a1: Option<f64>,
    /// Decay rate of the custom exponential kernel.
    #[arg(long)]
    a2: Option<f64>,
    /// Number of sequences.
    #[arg(long)]
    n: Option<usize>,
    /// Window end; sequences live on [0, horizon]. Defaults to pi.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Defaults to the output path with extension `manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    model: &'a HawkesModel,
    seed: u64,
    requested: usize,
    written: usize,
    dropped_empty: usize,
    window: [f64; 2],
    corpus: String,
}

pub fn run(args: Args, config: &RunConfig, globals: &Globals) -> Result<(), CliError> {
    let flags = ModelSection {
        name: args.model,
        mu: args.mu,
        a1: args.a1,
        a2: args.a2,
    };
    let model = truth::resolve(&truth::merge(&flags, &config.model))?;
    let s = &config.simulate;
    let n = args.n.or(s.n).unwrap_or(400);
    let horizon = args.horizon.or(s.horizon).unwrap_or(PI);
    let output = args
        .output
        .or_else(|| s.output.clone())
        .ok_or_else(|| CliError::Usage("simulate needs --output".into()))?;
    let manifest = args
        .manifest
        .or_else(|| s.manifest.clone())
        .unwrap_or_else(|| output.with_extension("manifest.json"));

    let window = ObservationWindow::up_to(horizon).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = rng_from_seed(globals.seed);
    let seqs = simulate_sequences(&model, window, n, DEFAULT_CASCADE_CAP, &mut rng)?;
    let kept: Vec<_> = seqs.into_iter().filter(|s| !s.is_empty()).collect();
    let dropped = n - kept.len();
    if n == 0 {
        log::warn!("--n 0: writing an empty corpus");
    }
    if dropped > 0 {
        log::warn!("{dropped} simulated sequences were empty and are not written");
    }
    let corpus = if kept.is_empty() {
        CascadeCorpus {
            horizon: Some(horizon),
            cascades: Vec::new(),
        }
    } else {
        CascadeCorpus::from_sequences(&kept)?
    };
    write_atomic(&output, corpus.to_text()?.as_bytes())?;
    let doc = Manifest {
        model: &model,
        seed: globals.seed,
        requested: n,
        written: kept.len(),
        dropped_empty: dropped,
        window: [0.0, horizon],
        corpus: output
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    write_atomic(&manifest, json.as_bytes())?;
    log::info!(
        "wrote {} sequences ({} events) to {}",
        kept.len(),
        kept.iter().map(|s| s.len()).sum::<usize>(),
        output.display()
    );
    Ok(())
}
