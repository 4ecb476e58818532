#![allow(clippy::field_reassign_with_default)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use causal_core::gridworld::{EnvConfig, RuleTable};
use causal_core::intervention::{adapt_epoch, decide, is_interventable, Decision, InterventionConfig, OracleNavigator};
use causal_core::orchestrator::{EpochReport, Mode, RunConfig, Runner};
use causal_core::scm::{EdgeStatus, Provenance};
use proptest::prelude::*;

fn state_hash(r: &Runner) -> u64 {
    let mut h = DefaultHasher::new();
    r.env().state().hash(&mut h);
    h.finish()
}

#[test]
fn adapting_never_touches_the_training_world_or_policy() {
    let mut config = RunConfig::default();
    config.mode = Mode::Full;
    config.total_steps = 4096;
    config.cycles_per_epoch = 1;
    config.trainer.rollout_len = 256;
    config.trainer.minibatch = 64;
    config.eval_episodes = 0;
    let mut runner = Runner::new(config, None).unwrap();
    runner.run_epoch().unwrap();
    let mut report = EpochReport::default();
    runner.learning_stage(&mut report);
    assert!(runner.graph().status_counts().hypothesized > 0);

    let (hash, fp, steps, eps) = (
        state_hash(&runner),
        runner.params().fingerprint(),
        runner.step_count(),
        runner.episodes().len(),
    );
    let state = runner.env().state().clone();
    runner.adapting_stage(&mut report);
    assert!(!report.interventions.is_empty());
    assert_eq!(runner.env().state(), &state);
    assert_eq!(state_hash(&runner), hash);
    assert_eq!(runner.params().fingerprint(), fp);
    assert_eq!(runner.step_count(), steps);
    assert_eq!(runner.episodes().len(), eps);
}

/// With a navigator that always reaches the cause, every true edge is
/// verified and every other interventable pair is refuted.
#[test]
fn oracle_navigator_recovers_the_truth_exactly() {
    let table = RuleTable::standard();
    let truth = table.ground_truth_relations();
    let base = EnvConfig::default();
    let mut g = table.empty_graph();
    let n = g.len();
    let mut candidates = 0;
    for s in 0..n {
        for d in 0..n {
            if s == d || !is_interventable(&g, s, d, &base) {
                continue;
            }
            if let Ok(next) = g.add_relation(s, d, Provenance::Manual) {
                g = next;
                candidates += 1;
            }
        }
    }
    let (out, records) = adapt_epoch(&g, &base, |_, _| OracleNavigator, usize::MAX, &InterventionConfig::default(), 0);
    assert_eq!(records.len(), candidates);
    for e in out.edges() {
        let (c, f) = (out.name_of(e.src), out.name_of(e.dst));
        let is_true = truth.iter().any(|&(a, b)| a == c && b == f);
        let want = if is_true { EdgeStatus::Verified } else { EdgeStatus::Refuted };
        assert_eq!(e.status, want, "{c} -> {f}");
    }
    for (a, b) in truth {
        let (s, d) = (out.id_of(a).unwrap(), out.id_of(b).unwrap());
        if is_interventable(&out, s, d, &base) {
            assert!(out.edge(s, d).is_some(), "{a} -> {b} was never scheduled");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn decide_is_a_pure_function(i in 0.0f64..=1.0, b in 0.0f64..=1.0, n in 0usize..40, delta in 0.05f64..1.0, min in 0usize..20) {
        let c = InterventionConfig { delta, min_trials: min, ..InterventionConfig::default() };
        let d = decide(i, b, n, &c);
        prop_assert_eq!(d, decide(i, b, n, &c.clone()));
        if n < min {
            prop_assert_eq!(d, Decision::Inconclusive);
        } else if i - b >= delta {
            prop_assert_eq!(d, Decision::Verified);
        } else if (i - b).abs() < delta {
            prop_assert_eq!(d, Decision::Refuted);
        } else {
            prop_assert_eq!(d, Decision::Inconclusive);
        }
    }
}
