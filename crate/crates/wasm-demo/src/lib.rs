//! Browser bindings: simulate a toy process, draw its true kernel, and fit
//! the kernel with a short Gibbs or EM run. Every export returns a JSON
//! string; errors come back as `{"error": "..."}`.

use std::f64::consts::PI;

use hawkes_core::baseline::{fit_exp_mle, ExpMleConfig};
use hawkes_core::data::simulate_sequences;
use hawkes_core::eval::{l2_distance, l2_scalar};
use hawkes_core::process::{uniform_grid, EventSequence, HawkesModel, Kernel, ObservationWindow, DEFAULT_CASCADE_CAP};
use hawkes_core::rng_from_seed;
use hawkes_core::samplers::{em_hawkes, gibbs_hawkes, FitResult, Method, SamplerConfig, DEFAULT_GRID_POINTS};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Demo runs stay small so the page stays responsive.
pub const MAX_SEQUENCES: u32 = 20;
pub const MAX_ITERATIONS: u32 = 2000;

fn model_named(name: &str) -> Result<HawkesModel, String> {
    match name {
        "exp" => Ok(HawkesModel::exp_toy()),
        "cos" => Ok(HawkesModel::cos_toy()),
        other => Err(format!("unknown model `{other}`")),
    }
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Serialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn truth_curve(model: &str, points: usize) -> Result<Curve, String> {
    let m = model_named(model)?;
    let grid = uniform_grid(PI, points.clamp(2, 4096));
    let values = grid.iter().map(|&t| m.kernel.eval(t)).collect();
    Ok(Curve { grid, values })
}

#[derive(Serialize)]
pub struct Simulation {
    pub sequences: Vec<Vec<f64>>,
    pub events: usize,
}

fn simulate_group(model: &str, sequences: u32, seed: u32) -> Result<(HawkesModel, Vec<EventSequence>), String> {
    let m = model_named(model)?;
    if sequences == 0 || sequences > MAX_SEQUENCES {
        return Err(format!("sequence count must lie in 1..={MAX_SEQUENCES}"));
    }
    let mut rng = rng_from_seed(seed as u64);
    let seqs = simulate_sequences(
        &m,
        ObservationWindow::canonical(),
        sequences as usize,
        DEFAULT_CASCADE_CAP,
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    Ok((m, seqs))
}

pub fn simulate_json(model: &str, sequences: u32, seed: u32) -> Result<Simulation, String> {
    let (_, seqs) = simulate_group(model, sequences, seed)?;
    Ok(Simulation {
        events: seqs.iter().map(|s| s.len()).sum(),
        sequences: seqs.iter().map(|s| s.times().to_vec()).collect(),
    })
}

#[derive(Serialize)]
pub struct DemoFit {
    pub fit: FitResult,
    pub truth: Vec<f64>,
    pub l2_phi: f64,
    pub l2_mu: f64,
    pub events: usize,
}

pub fn fit_json(model: &str, sequences: u32, seed: u32, method: &str, iterations: u32) -> Result<DemoFit, String> {
    let (m, seqs) = simulate_group(model, sequences, seed)?;
    let method: Method = method.parse().map_err(|e: hawkes_core::HawkesError| e.to_string())?;
    if iterations < 2 || iterations > MAX_ITERATIONS {
        return Err(format!("iterations must lie in 2..={MAX_ITERATIONS}"));
    }
    let config = SamplerConfig {
        iterations: iterations as usize,
        burn_in: iterations as usize / 5,
        em_max_iters: iterations as usize,
        seed: seed as u64,
        ..Default::default()
    };
    let fit = match method {
        Method::Gibbs => gibbs_hawkes(&seqs, &config),
        Method::Em => em_hawkes(&seqs, &config),
        Method::ExpMle => fit_exp_mle(
            &seqs,
            &ExpMleConfig {
                seed: seed as u64,
                ..Default::default()
            },
        )
        .map(|f| f.to_fit_result(DEFAULT_GRID_POINTS)),
    }
    .map_err(|e| e.to_string())?;
    let window = ObservationWindow::canonical();
    let kernel = fit.kernel_tabulated().map_err(|e| e.to_string())?;
    Ok(DemoFit {
        truth: fit.grid.iter().map(|&t| m.kernel.eval(t)).collect(),
        l2_phi: l2_distance(&kernel, &m.kernel, window),
        l2_mu: l2_scalar(fit.mu.estimate, m.mu, window),
        events: seqs.iter().map(|s| s.len()).sum(),
        fit,
    })
}

/// True kernel of `model` (`exp` or `cos`) on `points` grid points over `[0, pi]`.
#[wasm_bindgen]
pub fn truth(model: &str, points: u32) -> String {
    to_json(truth_curve(model, points as usize))
}

/// `sequences` seeded draws of the toy process on `[0, pi]`.
#[wasm_bindgen]
pub fn simulate(model: &str, sequences: u32, seed: u32) -> String {
    to_json(simulate_json(model, sequences, seed))
}

/// Simulates like `simulate`, then fits with `method` (`gibbs`, `em` or `exp-mle`).
#[wasm_bindgen]
pub fn fit(model: &str, sequences: u32, seed: u32, method: &str, iterations: u32) -> String {
    to_json(fit_json(model, sequences, seed, method, iterations))
}
