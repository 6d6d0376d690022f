//! The `--config` document. Every key can be overridden by the flag of the
//! same name.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub model: ModelSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub evaluate: EvaluateSection,
    pub bench: BenchSection,
    pub plot: PlotSection,
}

/// A ground-truth process: `exp`, `cos`, `poisson` or `custom`.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub name: Option<String>,
    pub mu: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: Option<usize>,
    pub horizon: Option<f64>,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub method: Option<String>,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub group_size: Option<usize>,
    pub split_prob: Option<f64>,
    pub similarity: Option<String>,
    pub anchor: Option<String>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub basis_size: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub truncation_eps: Option<f64>,
    pub em_branching_samples: Option<usize>,
    pub em_max_iters: Option<usize>,
    pub em_tolerance: Option<f64>,
    pub starts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub fits: Option<PathBuf>,
    pub truth: Option<String>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub method: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    pub iterations: Option<usize>,
    pub warmup: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))
    }
}
