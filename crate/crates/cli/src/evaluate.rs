use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use hawkes_core::data::{bundle, load_corpus, rescale_corpus, Role};
use hawkes_core::eval::{heldout_ll_per_event, l2_distance, l2_scalar};
use hawkes_core::process::{EventSequence, HawkesModel, ObservationWindow};
use hawkes_core::samplers::FitResult;

use crate::config::{ModelSection, RunConfig};
use crate::error::CliError;
use crate::fit::FitManifest;
use crate::output::write_atomic;
use crate::truth;

pub const CSV_HEADER: &str = "group,method,l2_phi,l2_mu,heldout_ll";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory written by `fit` (one or more methods).
    #[arg(long)]
    fits: Option<PathBuf>,
    /// Known generating model: exp, cos, poisson or custom. Omit for real data.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    /// Defaults to `evaluation.csv` inside the fits directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

struct Row {
    l2_phi: Option<f64>,
    l2_mu: Option<f64>,
    heldout: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Test groups of a manifest, rebuilt from its corpus and bundling settings.
fn test_groups(m: &FitManifest) -> Result<BTreeMap<usize, Vec<EventSequence>>, CliError> {
    let (corpus, _) = load_corpus(&m.corpus).map_err(|e| {
        CliError::Usage(format!("corpus {} named in the manifest: {e}", m.corpus.display()))
    })?;
    let (seqs, _) = rescale_corpus(&corpus, m.anchor);
    let b = bundle(&seqs, &m.bundle)?;
    for g in b.of_role(Role::Train) {
        let recorded = m.groups.iter().find(|e| e.role == Role::Train && e.index == g.index);
        if recorded.map(|e| &e.members) != Some(&g.members) {
            return Err(CliError::Data(format!(
                "corpus {} no longer matches the fit manifest",
                m.corpus.display()
            )));
        }
    }
    Ok(b.of_role(Role::Test).map(|g| (g.index, g.sequences.clone())).collect())
}

pub fn run(args: Args, config: &RunConfig) -> Result<(), CliError> {
    let dir = args
        .fits
        .or_else(|| config.evaluate.fits.clone())
        .ok_or_else(|| CliError::Usage("evaluate needs --fits".into()))?;
    let truth_name = args.truth.or_else(|| config.evaluate.truth.clone());
    let truth: Option<HawkesModel> = match truth_name {
        Some(name) => {
            let flags = ModelSection {
                name: Some(name),
                mu: args.mu,
                a1: args.a1,
                a2: args.a2,
            };
            Some(truth::resolve(&truth::merge(&flags, &config.model))?)
        }
        None => None,
    };
    let output = args
        .output
        .or_else(|| config.evaluate.output.clone())
        .unwrap_or_else(|| dir.join("evaluation.csv"));

    let mut manifests: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with("-manifest.json"))
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        return Err(CliError::Usage(format!("no fit manifests in {}", dir.display())));
    }

    let window = ObservationWindow::canonical();
    let mut rows: BTreeMap<(usize, String), Row> = BTreeMap::new();
    for path in &manifests {
        let m: FitManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let tests = test_groups(&m)?;
        for entry in m.groups.iter().filter(|g| g.role == Role::Train) {
            let Some(file) = &entry.file else { continue };
            let fit = FitResult::from_json(&std::fs::read_to_string(dir.join(file))?)?;
            let kernel = fit.kernel_tabulated()?;
            let (l2_phi, l2_mu) = match &truth {
                Some(t) => (
                    Some(l2_distance(&kernel, &t.kernel, window)),
                    Some(l2_scalar(fit.mu.estimate, t.mu, window)),
                ),
                None => (None, None),
            };
            let heldout = match tests.get(&entry.index) {
                Some(test) => Some(heldout_ll_per_event(&fit, test)?),
                None => None,
            };
            rows.insert(
                (entry.index, m.method.to_string()),
                Row {
                    l2_phi,
                    l2_mu,
                    heldout,
                },
            );
        }
    }

    let mut csv = format!("{CSV_HEADER}\n");
    for ((group, method), r) in &rows {
        let _ = writeln!(
            csv,
            "{group},{method},{},{},{}",
            cell(r.l2_phi),
            cell(r.l2_mu),
            cell(r.heldout)
        );
    }
    write_atomic(&output, csv.as_bytes())?;
    log::info!("wrote {} rows to {}", rows.len(), output.display());
    Ok(())
}
