use causal_core::extraction::{parse_relation_lines, Extractor, ExtractorConfig, RelationSet, ScriptedExtractor};
use causal_core::gridworld::RuleTable;
use causal_core::scm::Provenance;
use proptest::prelude::*;

fn vocab() -> Vec<String> {
    RuleTable::standard().vocabulary()
}

fn truth() -> Vec<(String, String)> {
    RuleTable::standard()
        .ground_truth_relations()
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scripted_is_deterministic_and_injections_are_false(
        seed in any::<u64>(),
        p_false in 0.0f64..=1.0,
        p_miss in 0.0f64..=1.0,
        text in ".{0,40}",
    ) {
        let cfg = ExtractorConfig { p_false, p_miss, noise_seed: seed };
        let a = ScriptedExtractor::new(cfg.clone()).unwrap().extract_relations(&text, &vocab()).unwrap();
        let b = ScriptedExtractor::new(cfg).unwrap().extract_relations(&text, &vocab()).unwrap();
        prop_assert_eq!(&a, &b);
        let truth = truth();
        for r in a.relations.iter() {
            prop_assert_ne!(&r.cause, &r.effect);
            prop_assert!(vocab().contains(&r.cause) && vocab().contains(&r.effect));
        }
        // With no misses every true relation is present.
        if p_miss == 0.0 {
            for (c, e) in &truth {
                prop_assert!(a.relations.contains(c, e));
            }
        }
    }

    #[test]
    fn render_then_parse_round_trips(picks in proptest::collection::vec((0usize..17, 0usize..17), 0..30)) {
        let v = vocab();
        let mut set = RelationSet::new();
        for (i, j) in picks {
            if i != j {
                set.insert(&v[i], &v[j], Provenance::Manual);
            }
        }
        let (back, rejected) = parse_relation_lines(&set.render(), &v, Provenance::Manual);
        prop_assert_eq!(rejected, 0);
        prop_assert_eq!(back.pairs(), set.pairs());
    }

    #[test]
    fn adversarial_replies_only_yield_vocabulary(reply in "(([a-z_ ]{0,12}|wood|table|stone)( ?-> ?| => |->)?([a-z_ ]{0,12}|wood|table)\n){0,12}") {
        let v = vocab();
        let (set, _) = parse_relation_lines(&reply, &v, Provenance::RemoteModel);
        for r in set.iter() {
            prop_assert!(v.contains(&r.cause), "{}", r.cause);
            prop_assert!(v.contains(&r.effect), "{}", r.effect);
            prop_assert_ne!(&r.cause, &r.effect);
        }
    }
}

#[test]
fn scripted_noise_never_duplicates_a_true_edge_as_false() {
    let truth = truth();
    let cfg = ExtractorConfig {
        p_false: 1.0,
        p_miss: 1.0,
        noise_seed: 5,
    };
    let ex = ScriptedExtractor::new(cfg).unwrap();
    for k in 0..50 {
        let out = ex.extract_relations(&format!("obs {k}"), &vocab()).unwrap();
        assert!(!out.relations.is_empty());
        for r in out.relations.iter() {
            assert!(!truth.iter().any(|(a, b)| *a == r.cause && *b == r.effect));
        }
    }
}
