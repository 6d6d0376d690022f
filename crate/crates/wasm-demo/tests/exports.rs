use hawkes_wasm::{fit, simulate, truth, MAX_SEQUENCES};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("exports return JSON")
}

#[test]
fn truth_curve_peaks_at_zero_lag() {
    let v = parse(&truth("exp", 101));
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 101);
    assert!((values[0].as_f64().unwrap() - 5.0).abs() < 1e-12);
    let cos = parse(&truth("cos", 4));
    // grid 0, pi/3, 2pi/3, pi: only the first point lies inside [0, 1]
    let c: Vec<f64> = cos["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((c[0] - 2.0).abs() < 1e-12);
    assert_eq!(&c[1..], &[0.0, 0.0, 0.0]);
}

#[test]
fn simulate_is_seeded() {
    let a = simulate("cos", 3, 9);
    assert_eq!(a, simulate("cos", 3, 9));
    assert_ne!(a, simulate("cos", 3, 10));
    let v = parse(&a);
    let seqs = v["sequences"].as_array().unwrap();
    assert_eq!(seqs.len(), 3);
    let total: usize = seqs.iter().map(|s| s.as_array().unwrap().len()).sum();
    assert_eq!(v["events"].as_u64().unwrap() as usize, total);
}

#[test]
fn bad_inputs_come_back_as_errors() {
    assert!(parse(&truth("weibull", 10))["error"].is_string());
    assert!(parse(&simulate("exp", MAX_SEQUENCES + 1, 0))["error"].is_string());
    assert!(parse(&fit("exp", 2, 0, "mcmc", 10))["error"].is_string());
    assert!(parse(&fit("exp", 2, 0, "gibbs", 1))["error"].is_string());
}

#[test]
fn short_fits_return_bands_and_scores() {
    for method in ["gibbs", "em", "exp-mle"] {
        let v = parse(&fit("exp", 4, 3, method, 20));
        assert!(v["error"].is_null(), "{method}: {v}");
        let f = &v["fit"];
        assert_eq!(f["method"], method);
        let n = f["grid"].as_array().unwrap().len();
        assert_eq!(v["truth"].as_array().unwrap().len(), n);
        for k in 0..n {
            let lo = f["p10"][k].as_f64().unwrap();
            let hi = f["p90"][k].as_f64().unwrap();
            assert!(lo <= hi + 1e-12);
        }
        assert!(v["l2_phi"].as_f64().unwrap().is_finite());
        assert!(f["mu"]["estimate"].as_f64().unwrap() > 0.0);
    }
}
