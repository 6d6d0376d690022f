use std::f64::consts::PI;

use hawkes_core::data::{
    bundle, load_corpus, parse_corpus, rescale_corpus, rescale_to_pi, simulate_sequences, BundleConfig, Cascade,
    CascadeCorpus, RescaleAnchor, Role, Similarity,
};
use hawkes_core::process::{EventSequence, HawkesModel, ObservationWindow, DEFAULT_CASCADE_CAP};
use hawkes_core::rng_from_seed;
use proptest::prelude::*;

fn sized(sizes: &[usize]) -> Vec<EventSequence> {
    sizes
        .iter()
        .map(|&k| {
            let times = (0..k).map(|j| (j as f64 + 0.5) * PI / k as f64).collect();
            EventSequence::new(times, ObservationWindow::canonical()).unwrap()
        })
        .collect()
}

#[test]
fn parses_one_cascade_per_line() {
    let (c, r) = parse_corpus("0 1.5 3.2\n");
    assert_eq!(c.cascades, vec![Cascade { times: vec![0.0, 1.5, 3.2], category: None }]);
    assert_eq!(c.horizon, None);
    assert_eq!((r.lines, r.accepted, r.headers), (1, 1, 0));
    assert!(r.warnings.is_empty());
}

#[test]
fn empty_input_warns_but_succeeds() {
    for text in ["", "# only a comment\n"] {
        let (c, r) = parse_corpus(text);
        assert!(c.is_empty());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.rejected.is_empty());
    }
}

#[test]
fn header_and_rejections() {
    let text = "# T=5\n0 1 2|news\n1 1\n2 6\n# T=7\n|x\n0 2|\n";
    let (c, r) = parse_corpus(text);
    assert_eq!(c.horizon, Some(5.0));
    assert_eq!(c.len(), 1);
    assert_eq!(c.cascades[0].category.as_deref(), Some("news"));
    let lines: Vec<usize> = r.rejected.iter().map(|x| x.line).collect();
    // tie, beyond horizon, late header, empty body, empty label
    assert_eq!(lines, vec![3, 4, 5, 6, 7]);
    assert_eq!(r.accepted + r.rejected.len() + r.headers, r.lines);
}

#[test]
fn file_round_trip() {
    let seqs = simulate_sequences(
        &HawkesModel::exp_toy(),
        ObservationWindow::canonical(),
        5,
        DEFAULT_CASCADE_CAP,
        &mut rng_from_seed(1),
    )
    .unwrap();
    let corpus = CascadeCorpus::from_sequences(&seqs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    corpus.save(&path).unwrap();
    let (back, report) = load_corpus(&path).unwrap();
    assert_eq!(back, corpus);
    assert_eq!(report.accepted, 5);
    assert!(load_corpus(&dir.path().join("missing.txt")).is_err());
}

#[test]
fn rescale_maps_endpoints() {
    let s = rescale_to_pi(&[0.0, 10.0], RescaleAnchor::LastEvent, None).unwrap();
    assert_eq!(s.times(), &[0.0, PI]);
    let s = rescale_to_pi(&[5.0, 6.0, 15.0], RescaleAnchor::LastEvent, None).unwrap();
    assert_eq!(s.times()[0], 0.0);
    assert!((s.times()[1] - PI / 10.0).abs() < 1e-15);
    assert_eq!(s.times()[2], PI);
    assert!(rescale_to_pi(&[], RescaleAnchor::LastEvent, None).is_err());
    assert!(rescale_to_pi(&[3.0], RescaleAnchor::LastEvent, None).is_err());
}

#[test]
fn rescale_corpus_reports_failures() {
    let (c, _) = parse_corpus("0 4\n2\n1 2 3\n");
    let (ok, failed) = rescale_corpus(&c, RescaleAnchor::LastEvent);
    assert_eq!(ok.len(), 2);
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].0, 1);
}

#[test]
fn bundle_sixty_into_two_train_groups() {
    let seqs = sized(&(1..=60).collect::<Vec<_>>());
    let cfg = BundleConfig {
        group_size: 30,
        split_prob: 1.0,
        ..Default::default()
    };
    let b = bundle(&seqs, &cfg).unwrap();
    assert_eq!(b.groups.len(), 2);
    assert!(b.groups.iter().all(|g| g.role == Role::Train && g.sequences.len() == 30));
    assert_eq!(b.of_role(Role::Test).count(), 0);
}

#[test]
fn bundle_by_size_orders_groups() {
    let sizes: Vec<usize> = (0..90).map(|i| 1 + (i * 37) % 50).collect();
    let seqs = sized(&sizes);
    let cfg = BundleConfig {
        group_size: 10,
        split_prob: 1.0,
        ..Default::default()
    };
    let b = bundle(&seqs, &cfg).unwrap();
    let gs: Vec<_> = b.of_role(Role::Train).collect();
    assert_eq!(gs.len(), 9);
    for w in gs.windows(2) {
        let max = w[0].sequences.iter().map(|s| s.len()).max().unwrap();
        let min = w[1].sequences.iter().map(|s| s.len()).min().unwrap();
        assert!(max <= min);
    }
    let in_order = bundle(
        &seqs,
        &BundleConfig {
            similarity: Similarity::InOrder,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(in_order.groups[0].members, (0..10).collect::<Vec<_>>());
}

#[test]
fn bundle_rejects_bad_config() {
    let seqs = sized(&[3, 4]);
    for cfg in [
        BundleConfig {
            group_size: 0,
            ..Default::default()
        },
        BundleConfig {
            split_prob: 1.5,
            ..Default::default()
        },
    ] {
        assert!(bundle(&seqs, &cfg).is_err());
    }
}

fn cascade() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e6, 1..30).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_round_trip(cs in prop::collection::vec(cascade(), 1..10), label in prop::option::of("[a-z]{1,8}")) {
        let horizon = cs.iter().flat_map(|c| c.iter().copied()).fold(0.0, f64::max) + 1.0;
        let corpus = CascadeCorpus {
            horizon: Some(horizon),
            cascades: cs.into_iter().map(|times| Cascade { times, category: label.clone() }).collect(),
        };
        let (back, report) = parse_corpus(&corpus.to_text().unwrap());
        prop_assert!(report.rejected.is_empty());
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn line_accounting(lines in prop::collection::vec("[0-9 .#|a-zT=-]{0,12}", 0..20)) {
        let text = lines.join("\n");
        let (_, r) = parse_corpus(&text);
        prop_assert_eq!(r.accepted + r.rejected.len() + r.headers, r.lines);
    }

    #[test]
    fn rescale_preserves_ratios_and_is_idempotent(times in cascade()) {
        prop_assume!(times.len() >= 2);
        let s = rescale_to_pi(&times, RescaleAnchor::LastEvent, None).unwrap();
        let t = s.times();
        prop_assert_eq!(t[0], 0.0);
        prop_assert_eq!(*t.last().unwrap(), PI);
        let span = times.last().unwrap() - times[0];
        for (a, b) in times.iter().zip(t) {
            prop_assert!(((a - times[0]) / span - b / PI).abs() <= 1e-12);
        }
        let again = rescale_to_pi(t, RescaleAnchor::LastEvent, None).unwrap();
        for (a, b) in again.times().iter().zip(t) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn bundle_partitions_inputs(
        sizes in prop::collection::vec(1usize..40, 0..80),
        group_size in 1usize..12,
        split in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let seqs = sized(&sizes);
        let cfg = BundleConfig { group_size, split_prob: split, seed, ..Default::default() };
        let b = bundle(&seqs, &cfg).unwrap();
        let mut seen: Vec<usize> = b.groups.iter().flat_map(|g| g.members.clone()).chain(b.dropped.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..sizes.len()).collect::<Vec<_>>());
        prop_assert!(b.groups.iter().all(|g| g.sequences.len() == group_size));
        for role in [Role::Train, Role::Test] {
            let idx: Vec<usize> = b.of_role(role).map(|g| g.index).collect();
            prop_assert_eq!(idx, (0..b.of_role(role).count()).collect::<Vec<_>>());
        }
        prop_assert_eq!(bundle(&seqs, &cfg).unwrap(), b);
    }
}
