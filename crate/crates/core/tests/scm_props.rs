use std::collections::BTreeSet;

use causal_core::scm::{
    CausalGraph, CausalVariable, EdgeStatus, Evidence, Provenance, ScmError, StatusSet, VariableKind,
};
use proptest::prelude::*;

fn vars(n: usize) -> Vec<CausalVariable> {
    (0..n)
        .map(|i| CausalVariable::new(i, format!("v{i}"), VariableKind::Resource))
        .collect()
}

fn edge_set(g: &CausalGraph) -> BTreeSet<(usize, usize, EdgeStatus)> {
    g.edges().map(|e| (e.src, e.dst, e.status)).collect()
}

fn is_acyclic(g: &CausalGraph) -> bool {
    // Independent check: repeatedly strip sinks.
    let mut edges: Vec<(usize, usize)> = g.edges_with(StatusSet::ACTIVE).map(|e| (e.src, e.dst)).collect();
    let mut alive: BTreeSet<usize> = (0..g.len()).collect();
    loop {
        let sink = alive.iter().copied().find(|&v| !edges.iter().any(|&(s, _)| s == v));
        match sink {
            Some(v) => {
                alive.remove(&v);
                edges.retain(|&(_, d)| d != v);
            }
            None => return alive.is_empty(),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Add(usize, usize),
    Status(usize, usize, u8),
    Surgery(usize),
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..n, 0..n).prop_map(|(a, b)| Op::Add(a, b)),
        2 => (0..n, 0..n, 0u8..3).prop_map(|(a, b, s)| Op::Status(a, b, s)),
        1 => (0..n).prop_map(Op::Surgery),
    ]
}

/// Random DAG over `n` variables: edges only go from a lower to a higher
/// position in a random permutation.
fn random_dag() -> impl Strategy<Value = (usize, Vec<(usize, usize, u8)>)> {
    (1usize..=8).prop_flat_map(|n| {
        let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        let pairs = proptest::collection::vec((0..n, 0..n, 0u8..3), 0..(n * n));
        (Just(n), perm, pairs).prop_map(|(n, perm, pairs)| {
            let edges = pairs.into_iter().filter(|(a, b, _)| perm[*a] < perm[*b]).collect();
            (n, edges)
        })
    })
}

fn build(n: usize, edges: &[(usize, usize, u8)]) -> CausalGraph {
    let mut g = CausalGraph::new(vars(n)).unwrap();
    for &(a, b, s) in edges {
        g = g.add_relation(a, b, Provenance::Manual).unwrap();
        let status = [EdgeStatus::Hypothesized, EdgeStatus::Verified, EdgeStatus::Refuted][s as usize];
        g = g.set_status(a, b, status, Evidence::new(1, 0)).unwrap();
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_operations_keep_active_subgraph_acyclic(ops in proptest::collection::vec(op(6), 1..60)) {
        let mut g = CausalGraph::new(vars(6)).unwrap();
        for o in ops {
            let before = g.clone();
            let r = match o {
                Op::Add(a, b) => g.add_relation(a, b, Provenance::Manual),
                Op::Status(a, b, s) => {
                    let status = [EdgeStatus::Hypothesized, EdgeStatus::Verified, EdgeStatus::Refuted][s as usize];
                    g.set_status(a, b, status, Evidence::new(0, 1))
                }
                Op::Surgery(v) => g.do_surgery(v),
            };
            match r {
                Ok(next) => g = next,
                Err(ScmError::CycleCreated { .. }) | Err(ScmError::SelfLoop(_)) | Err(ScmError::UnknownEdge { .. }) => {
                    prop_assert_eq!(&g, &before, "rejection must leave the graph unchanged");
                }
                Err(e) => prop_assert!(false, "unexpected error {e:?}"),
            }
            prop_assert!(is_acyclic(&g));
        }
    }

    #[test]
    fn surgery_matches_edge_filter((n, edges) in random_dag(), v in 0usize..8) {
        let g = build(n, &edges);
        let v = v % n;
        let cut = g.do_surgery(v).unwrap();
        let oracle: BTreeSet<_> = edge_set(&g).into_iter().filter(|&(_, d, _)| d != v).collect();
        prop_assert_eq!(edge_set(&cut), oracle);
        prop_assert!(cut.parents(v, StatusSet::ALL).is_empty());
    }

    #[test]
    fn matrix_round_trip((n, edges) in random_dag()) {
        let g = build(n, &edges);
        let back = CausalGraph::from_matrix(vars(n), &g.to_matrix(), Provenance::Manual).unwrap();
        let active: BTreeSet<_> = g.edges_with(StatusSet::ACTIVE).map(|e| (e.src, e.dst)).collect();
        let rebuilt: BTreeSet<_> = back.edges().map(|e| (e.src, e.dst)).collect();
        prop_assert_eq!(active, rebuilt);
        prop_assert!(back.edges().all(|e| e.status == EdgeStatus::Hypothesized));
    }

    #[test]
    fn insertion_order_does_not_matter((n, edges) in random_dag()) {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
        let mut fwd = CausalGraph::new(vars(n)).unwrap();
        for &(a, b) in &pairs {
            fwd = fwd.add_relation(a, b, Provenance::Manual).unwrap();
            fwd = fwd.add_relation(a, b, Provenance::Manual).unwrap();
        }
        let mut rev = CausalGraph::new(vars(n)).unwrap();
        for &(a, b) in pairs.iter().rev() {
            rev = rev.add_relation(a, b, Provenance::Manual).unwrap();
        }
        prop_assert_eq!(fwd, rev);
    }

    #[test]
    fn json_round_trip((n, edges) in random_dag()) {
        let g = build(n, &edges);
        let back = CausalGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back, g);
    }
}
