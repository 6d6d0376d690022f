mod common;

use std::f64::consts::PI;

use common::{gl5_piecewise, phi_cos, phi_exp};
use hawkes_core::baseline::ExpMleFit;
use hawkes_core::eval::{
    bench_iteration_time, bench_sequences, heldout_ll_per_event, l2_distance, l2_distance_fn, l2_scalar, BenchConfig,
};
use hawkes_core::process::{uniform_grid, EventSequence, HawkesModel, ObservationWindow, TriggeringKernelSpec};
use hawkes_core::samplers::{FitResult, Method, SamplerConfig};
use proptest::prelude::*;

fn w() -> ObservationWindow {
    ObservationWindow::canonical()
}

/// A point-mass fit with background `mu` and kernel `f` on a 256-point grid.
fn fit_with(mu: f64, f: impl Fn(f64) -> f64) -> FitResult {
    let base = ExpMleFit {
        model: HawkesModel::new(mu, TriggeringKernelSpec::exponential(0.5, 1.0).unwrap()).unwrap(),
        log_likelihood: 0.0,
        converged_starts: 1,
    };
    let mut r = base.to_fit_result(256);
    r.kernel = r.grid.iter().map(|&t| f(t)).collect();
    r
}

fn seq(times: &[f64]) -> EventSequence {
    EventSequence::new(times.to_vec(), w()).unwrap()
}

#[test]
fn shifted_constant_is_root_pi() {
    for c in [0.0, 1.0, 7.5] {
        let d = l2_distance_fn(|_| c + 1.0, |_| c, w());
        assert!((d - PI.sqrt()).abs() < 1e-12);
    }
    assert!((l2_scalar(12.0, 10.0, w()) - 2.0 * PI.sqrt()).abs() < 1e-14);
}

#[test]
fn toy_kernels_against_quadrature() {
    let oracle = gl5_piecewise(|t| (phi_exp(t) - phi_cos(t)).powi(2), 0.0, PI, &[1.0], 200).sqrt();
    let d = l2_distance(&TriggeringKernelSpec::ExpToy, &TriggeringKernelSpec::CosineToy, w());
    assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
    let z = l2_distance(&TriggeringKernelSpec::ExpToy, &TriggeringKernelSpec::Zero, w());
    // integral of 25 exp(-10 t) over [0, pi]
    let closed = (2.5 * (1.0 - (-10.0 * PI).exp())).sqrt();
    assert!((z - closed).abs() < 1e-6);
}

#[test]
fn poisson_heldout_closed_form() {
    let fit = fit_with(4.0, |_| 0.0);
    let test = [seq(&[0.3, 1.1, 2.7]), seq(&[0.5, 2.0])];
    let ll = heldout_ll_per_event(&fit, &test).unwrap();
    let expected = (5.0 * 4.0f64.ln() - 2.0 * 4.0 * PI) / 5.0;
    assert!((ll - expected).abs() < 1e-12);
    assert!(heldout_ll_per_event(&fit, &[]).is_err());
}

#[test]
fn heldout_ignores_sequence_order() {
    let fit = fit_with(3.0, phi_cos);
    let a = seq(&[0.1, 0.4, 0.45, 2.0]);
    let b = seq(&[1.0, 1.2]);
    let c = seq(&[0.7, 2.9, 3.0]);
    let x = heldout_ll_per_event(&fit, &[a.clone(), b.clone(), c.clone()]).unwrap();
    let y = heldout_ll_per_event(&fit, &[c, a, b]).unwrap();
    assert!((x - y).abs() < 1e-12);
}

#[test]
fn isolated_event_adds_log_mu() {
    // an event at the window end, more than the kernel support after every
    // other event, sees intensity mu and has no compensator tail
    let mu = 3.0;
    let fit = fit_with(mu, phi_cos);
    let base = seq(&[0.2, 0.5, 1.5, 2.0]);
    let plus = seq(&[0.2, 0.5, 1.5, 2.0, PI]);
    let l0 = heldout_ll_per_event(&fit, std::slice::from_ref(&base)).unwrap() * 4.0;
    let l1 = heldout_ll_per_event(&fit, std::slice::from_ref(&plus)).unwrap() * 5.0;
    assert!((l1 - l0 - mu.ln()).abs() < 1e-12, "{}", l1 - l0);
}

#[test]
fn bench_sizes_are_deterministic() {
    let cfg = BenchConfig {
        sizes: vec![100, 300],
        repeats: 1,
        iterations: 1,
        warmup: 0,
        seed: 2,
        sampler: SamplerConfig::default(),
        ..Default::default()
    };
    let a = bench_iteration_time(Method::Gibbs, &cfg).unwrap();
    let b = bench_iteration_time(Method::Gibbs, &cfg).unwrap();
    let ns = |t: &[hawkes_core::eval::BenchRow]| t.iter().map(|r| r.n).collect::<Vec<_>>();
    assert_eq!(ns(&a.truncated), ns(&b.truncated));
    assert_eq!(ns(&a.truncated), ns(&a.untruncated));
    let seqs = bench_sequences(&cfg).unwrap();
    assert_eq!(ns(&a.truncated), seqs.iter().map(|s| s.len()).collect::<Vec<_>>());
    for r in a.truncated.iter().chain(&a.untruncated) {
        assert!(r.seconds_per_iter > 0.0);
        assert!((r.ratio - r.seconds_per_iter / r.n as f64).abs() <= 1e-15);
    }
    assert!(bench_iteration_time(Method::Em, &cfg).is_err());
}

#[test]
fn bench_windows_scale_with_size() {
    let cfg = BenchConfig {
        sizes: vec![500, 2000],
        ..Default::default()
    };
    let seqs = bench_sequences(&cfg).unwrap();
    for (s, &n) in seqs.iter().zip(&cfg.sizes) {
        assert!((s.window().length() - n as f64 * 0.5).abs() < 1e-9);
        // Poisson cluster counts: within 5 sd of the target
        let sd = (n as f64 / (1.0 - 0.5) / (1.0 - 0.5)).sqrt();
        assert!((s.len() as f64 - n as f64).abs() < 5.0 * sd, "{} vs {n}", s.len());
    }
}

fn exp_kernel() -> impl Strategy<Value = TriggeringKernelSpec> {
    (0.01f64..3.0, 0.1f64..20.0).prop_map(|(a1, a2)| TriggeringKernelSpec::exponential(a1, a2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l2_is_a_metric(f in exp_kernel(), g in exp_kernel(), h in exp_kernel()) {
        let fg = l2_distance(&f, &g, w());
        let gf = l2_distance(&g, &f, w());
        let gh = l2_distance(&g, &h, w());
        let fh = l2_distance(&f, &h, w());
        prop_assert!(fg >= 0.0);
        prop_assert!((fg - gf).abs() <= 1e-12);
        prop_assert_eq!(l2_distance(&f, &f, w()), 0.0);
        // slack covers the quadrature stopping tolerance
        prop_assert!(fh <= fg + gh + 1e-6);
    }

    #[test]
    fn l2_of_tabulated_matches_analytic(a1 in 0.1f64..2.0, a2 in 0.5f64..5.0) {
        let spec = TriggeringKernelSpec::exponential(a1, a2).unwrap();
        let grid = uniform_grid(PI, 4097);
        let fit = FitResult { kernel: grid.iter().map(|&t| a1 * a2 * (-a2 * t).exp()).collect(), grid, ..fit_with(1.0, |_| 0.0) };
        let tab = fit.kernel_tabulated().unwrap();
        prop_assert!(l2_distance(&tab, &spec, w()) < 1e-4);
    }
}
