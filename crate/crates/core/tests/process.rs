mod common;

use std::f64::consts::PI;

use common::{gl5, gl5_piecewise, mean_sd, phi_cos, phi_exp};
use hawkes_core::process::{
    compensator, intensity, log_likelihood, simulate_hawkes, simulate_poisson, EventSequence, HawkesModel, Kernel,
    ObservationWindow, Tabulated, TriggeringKernelSpec, DEFAULT_CASCADE_CAP,
};
use hawkes_core::rng_from_seed;
use proptest::prelude::*;

fn direct_intensity(mu: f64, phi: impl Fn(f64) -> f64, times: &[f64], t: f64) -> f64 {
    mu + times.iter().filter(|&&s| s < t).map(|&s| phi(t - s)).sum::<f64>()
}

fn check_compensator(kernel: &TriggeringKernelSpec, phi: impl Fn(f64) -> f64, extra_breaks: &[f64]) {
    let w = ObservationWindow::canonical();
    let mut rng = rng_from_seed(31);
    let model = HawkesModel::new(10.0, kernel.clone()).unwrap();
    let (seq, _) = simulate_hawkes(&model, w, DEFAULT_CASCADE_CAP, &mut rng).unwrap();
    // five events, as small as the oracle needs
    let seq = EventSequence::new(seq.times()[..5].to_vec(), w).unwrap();
    let times = seq.times();
    let mut breaks: Vec<f64> = times.to_vec();
    for &s in times {
        breaks.extend(extra_breaks.iter().map(|b| s + b));
    }
    let oracle = gl5_piecewise(|t| direct_intensity(10.0, &phi, times, t), 0.0, PI, &breaks, 400);
    let got = compensator(10.0, kernel, &seq);
    assert!((got - oracle).abs() <= 1e-6 * oracle, "{kernel:?}: {got} vs {oracle}");

    let ll_oracle: f64 = times.iter().map(|&t| direct_intensity(10.0, &phi, times, t).ln()).sum::<f64>() - oracle;
    let ll = log_likelihood(10.0, kernel, &seq);
    assert!((ll - ll_oracle).abs() <= 1e-6 * ll_oracle.abs(), "{ll} vs {ll_oracle}");
    assert!((model.log_likelihood(&seq) - ll_oracle).abs() <= 1e-6 * ll_oracle.abs());
}

#[test]
fn closed_form_compensator_matches_quadrature() {
    check_compensator(&TriggeringKernelSpec::ExpToy, phi_exp, &[]);
    check_compensator(&TriggeringKernelSpec::CosineToy, phi_cos, &[1.0]);
    let (a1, a2) = (0.6, 2.5);
    check_compensator(
        &TriggeringKernelSpec::exponential(a1, a2).unwrap(),
        |t| if t < 0.0 { 0.0 } else { a1 * a2 * (-a2 * t).exp() },
        &[],
    );
    check_compensator(&TriggeringKernelSpec::Zero, |_| 0.0, &[]);
}

#[test]
fn tabulated_compensator_matches_quadrature() {
    let grid: Vec<f64> = (0..=40).map(|k| 2.0 * k as f64 / 40.0).collect();
    let values: Vec<f64> = grid.iter().map(|&t| 3.0 * (-t).exp() * (1.0 + (4.0 * t).sin().powi(2))).collect();
    let tab = Tabulated::new(grid.clone(), values.clone()).unwrap();
    let lerp = |t: f64| {
        if !(0.0..=2.0).contains(&t) {
            return 0.0;
        }
        let k = ((t / 0.05) as usize).min(39);
        let u = (t - grid[k]) / 0.05;
        values[k] + u * (values[k + 1] - values[k])
    };
    for upper in [0.0, 0.013, 0.5, 1.234_567, 2.0, 3.0] {
        let breaks: Vec<f64> = grid.clone();
        let oracle = gl5_piecewise(lerp, 0.0, upper, &breaks, 4);
        assert!((tab.cumulative(upper) - oracle).abs() < 1e-12, "upper {upper}");
    }
}

#[test]
fn intensity_examples() {
    let w = ObservationWindow::canonical();
    let two = EventSequence::new(vec![0.2, 0.5], w).unwrap();
    let got = intensity(10.0, &TriggeringKernelSpec::CosineToy, &two, 0.7);
    assert!((got - (10.0 + phi_cos(0.5) + phi_cos(0.2))).abs() < 1e-12);
    let empty = EventSequence::empty(w);
    assert_eq!(log_likelihood(10.0, &TriggeringKernelSpec::ExpToy, &empty), -10.0 * PI);
    let one = EventSequence::new(vec![1.0], w).unwrap();
    let ll = log_likelihood(10.0, &TriggeringKernelSpec::Zero, &one);
    assert!((ll - (10f64.ln() - 10.0 * PI)).abs() < 1e-12);
}

#[test]
fn constant_rate_counts() {
    let w = ObservationWindow::canonical();
    let mut rng = rng_from_seed(5);
    let counts: Vec<f64> = (0..2000)
        .map(|_| simulate_poisson(|_| 10.0, 10.0, w, &mut rng).unwrap().len() as f64)
        .collect();
    let (m, _) = mean_sd(&counts);
    let se = (10.0 * PI / 2000.0).sqrt();
    assert!((m - 10.0 * PI).abs() < 3.0 * se, "mean {m}");
    assert!(simulate_poisson(|_| 0.0, 0.0, w, &mut rng).unwrap().is_empty());
}

#[test]
fn exponential_rate_counts_match_branching_ratio() {
    let w = ObservationWindow::up_to(10.0).unwrap();
    let mut rng = rng_from_seed(6);
    let runs = 4000;
    let counts: Vec<f64> = (0..runs)
        .map(|_| simulate_poisson(phi_exp, 5.0, w, &mut rng).unwrap().len() as f64)
        .collect();
    let (m, _) = mean_sd(&counts);
    let expected = 1.0 - (-50f64).exp();
    assert!((m - expected).abs() < 3.0 * (expected / runs as f64).sqrt(), "mean {m}");
}

/// Mean event count on [0, T] from the renewal equation
/// `m(t) = mu + int_0^t phi(s) m(t - s) ds`, solved by the trapezoid rule.
fn renewal_mean_count(mu: f64, phi: impl Fn(f64) -> f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let f: Vec<f64> = (0..=steps).map(|k| phi(k as f64 * h)).collect();
    let mut m = vec![mu; steps + 1];
    for n in 1..=steps {
        let mut acc = 0.5 * f[n] * m[0];
        for k in 1..n {
            acc += f[k] * m[n - k];
        }
        m[n] = (mu + h * acc) / (1.0 - 0.5 * h * f[0]);
    }
    let interior: f64 = m[1..steps].iter().sum();
    h * (0.5 * (m[0] + m[steps]) + interior)
}

#[test]
fn toy_counts_match_renewal_oracle() {
    let w = ObservationWindow::canonical();
    for (model, phi, seed) in [
        (HawkesModel::exp_toy(), phi_exp as fn(f64) -> f64, 11u64),
        (HawkesModel::cos_toy(), phi_cos as fn(f64) -> f64, 12),
    ] {
        let oracle = renewal_mean_count(10.0, phi, PI, 4000);
        let mut rng = rng_from_seed(seed);
        let counts: Vec<f64> = (0..400)
            .map(|_| simulate_hawkes(&model, w, DEFAULT_CASCADE_CAP, &mut rng).unwrap().0.len() as f64)
            .collect();
        let (m, _) = mean_sd(&counts);
        assert!((m / oracle - 1.0).abs() < 0.05, "{:?}: mean {m} vs {oracle}", model.kernel);
    }
    // for the exp toy the renewal equation also has the closed form mu (T + 5 T^2 / 2)
    let closed = 10.0 * (PI + 2.5 * PI * PI);
    assert!((renewal_mean_count(10.0, phi_exp, PI, 4000) / closed - 1.0).abs() < 1e-4);
}

#[test]
fn simulated_structures_are_forests() {
    let w = ObservationWindow::canonical();
    let mut rng = rng_from_seed(8);
    for model in [HawkesModel::exp_toy(), HawkesModel::cos_toy()] {
        let (seq, s) = simulate_hawkes(&model, w, DEFAULT_CASCADE_CAP, &mut rng).unwrap();
        assert_eq!(seq.len(), s.len());
        let t = seq.times();
        for (i, p) in s.parents().iter().enumerate() {
            if let Some(p) = *p {
                assert!(p < i && t[p] < t[i]);
                assert!(model.kernel.eval(t[i] - t[p]) > 0.0);
            }
        }
        assert!(s.immigrant_count() >= 1);
    }
    let model = HawkesModel::new(0.0, TriggeringKernelSpec::ExpToy).unwrap();
    assert!(simulate_hawkes(&model, w, DEFAULT_CASCADE_CAP, &mut rng).unwrap().0.is_empty());
}

#[test]
fn simulation_is_seeded() {
    let w = ObservationWindow::canonical();
    let run = |seed| {
        let (seq, s) = simulate_hawkes(&HawkesModel::cos_toy(), w, DEFAULT_CASCADE_CAP, &mut rng_from_seed(seed)).unwrap();
        let bits: Vec<u64> = seq.times().iter().map(|t| t.to_bits()).collect();
        (bits, s.parents().to_vec())
    };
    assert_eq!(run(77), run(77));
    assert_ne!(run(77), run(78));
}

#[test]
fn branching_ratios() {
    assert!((TriggeringKernelSpec::CosineToy.branching_ratio() - 1.0).abs() < 1e-12);
    let quad = gl5(phi_cos, 0.0, 1.0, 200);
    assert!((quad - 1.0).abs() < 1e-12);
    assert!((TriggeringKernelSpec::exponential(0.3, 2.0).unwrap().branching_ratio() - 0.3).abs() < 1e-12);
}

proptest! {
    #[test]
    fn intensity_is_at_least_mu_and_grows_with_history(
        mut times in prop::collection::vec(0.0..PI, 1..30),
        extra in 0.0..PI,
        t in 0.0..PI,
    ) {
        times.sort_by(f64::total_cmp);
        times.dedup();
        let w = ObservationWindow::canonical();
        let seq = EventSequence::new(times.clone(), w).unwrap();
        let k = TriggeringKernelSpec::CosineToy;
        let base = intensity(10.0, &k, &seq, t);
        prop_assert!(base >= 10.0);
        if !times.contains(&extra) {
            times.push(extra);
            times.sort_by(f64::total_cmp);
            let more = EventSequence::new(times, w).unwrap();
            prop_assert!(intensity(10.0, &k, &more, t) >= base);
        }
    }
}
