#![allow(clippy::field_reassign_with_default)]

use causal_core::orchestrator::{score, train, windowed_scores, EpisodeRecord, RunConfig};
use proptest::prelude::*;

fn rates() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..=100.0, 1..22)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn raising_one_rate_never_lowers_the_score(s in rates(), i in any::<prop::sample::Index>(), bump in 0.0f64..50.0) {
        let k = i.index(s.len());
        let mut t = s.clone();
        t[k] = (t[k] + bump).min(100.0);
        prop_assert!(score(&t).unwrap() >= score(&s).unwrap() - 1e-12);
    }

    #[test]
    fn order_does_not_matter(s in rates()) {
        let mut r = s.clone();
        r.reverse();
        r.rotate_left(s.len() / 2);
        prop_assert!((score(&s).unwrap() - score(&r).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn constant_rates_score_themselves(c in 0.0f64..=100.0, n in 1usize..22) {
        prop_assert!((score(&vec![c; n]).unwrap() - c).abs() < 1e-9 * (1.0 + c));
    }

    #[test]
    fn spreading_rates_never_helps(m in 0.0f64..=50.0, d in 0.0f64..=50.0) {
        let even = score(&[m, m]).unwrap();
        let spread = score(&[m - d.min(m), m + d.min(m)]).unwrap();
        prop_assert!(spread <= even + 1e-9);
    }

    #[test]
    fn score_lies_between_min_and_max(s in rates()) {
        let v = score(&s).unwrap();
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(0.0, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }
}

#[test]
fn windows_partition_the_episodes() {
    let eps: Vec<EpisodeRecord> = (0..50u64)
        .map(|k| EpisodeRecord {
            episode: k,
            seed: k,
            start_step: k * 20,
            end_step: k * 20 + 20,
            length: 20,
            env_return: 0.0,
            shaped_return: 0.0,
            died: false,
            achievements: if k % 2 == 0 { "collect_wood".into() } else { String::new() },
        })
        .collect();
    let w = windowed_scores(&eps, 1000, 6, &causal_core::gridworld::Achievement::ALL);
    assert_eq!(w.len(), 6);
    assert_eq!(w.iter().map(|w| w.episodes).sum::<usize>(), 50);
    assert_eq!(w.last().unwrap().end_step, 1000);
}

#[test]
fn identical_configs_write_identical_logs() {
    let mut config = RunConfig::default();
    config.total_steps = 3000;
    config.cycles_per_epoch = 2;
    config.trainer.rollout_len = 500;
    config.trainer.minibatch = 100;
    config.eval_episodes = 2;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = train(config.clone(), Some(a.path())).unwrap();
    let sb = train(config, Some(b.path())).unwrap();
    assert_eq!(serde_json::to_string(&sa).unwrap(), serde_json::to_string(&sb).unwrap());
    for f in ["metrics.csv", "episodes.csv", "traces.jsonl", "goals.jsonl", "interventions.jsonl", "graph.json", "checkpoint.json"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs");
    }
}
