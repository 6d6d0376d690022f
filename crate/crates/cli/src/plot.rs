use std::path::PathBuf;

use hawkes_core::process::Kernel;
use hawkes_core::samplers::FitResult;

use crate::config::{ModelSection, RunConfig};
use crate::error::CliError;
use crate::output::write_atomic;
use crate::svg::{render, BandPlot};
use crate::truth;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// FitResult document.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Defaults to the input path with extension `svg`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Overlay a known kernel: exp, cos, poisson or custom.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
}

pub fn run(args: Args, config: &RunConfig) -> Result<(), CliError> {
    let input = args
        .input
        .or_else(|| config.plot.input.clone())
        .ok_or_else(|| CliError::Usage("plot needs --input".into()))?;
    let output = args
        .output
        .or_else(|| config.plot.output.clone())
        .unwrap_or_else(|| input.with_extension("svg"));
    let text = std::fs::read_to_string(&input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let fit = FitResult::from_json(&text)?;
    let truth_curve = match args.truth.or_else(|| config.plot.truth.clone()) {
        Some(name) => {
            let flags = ModelSection {
                name: Some(name),
                mu: None,
                a1: args.a1,
                a2: args.a2,
            };
            let model = truth::resolve(&truth::merge(&flags, &config.model))?;
            Some(fit.grid.iter().map(|&t| model.kernel.eval(t)).collect::<Vec<_>>())
        }
        None => None,
    };
    let title = match fit.group {
        Some(g) => format!("{} fit, group {g}", fit.method),
        None => format!("{} fit", fit.method),
    };
    let svg = render(&BandPlot {
        title: &title,
        grid: &fit.grid,
        p10: &fit.p10,
        p50: &fit.p50,
        p90: &fit.p90,
        truth: truth_curve.as_deref(),
    });
    write_atomic(&output, svg.as_bytes())?;
    log::info!("wrote {}", output.display());
    Ok(())
}
