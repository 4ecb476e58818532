//! Verification of hypothesized edges by intervening in sandbox worlds.
//!
//! For each scheduled edge a sandbox is built with the cause present. In the
//! intervention arm the agent walks to the cause and performs the action that
//! exercises it; in the baseline arm it walks there and does nothing. An edge
//! is verified when the effect increases far more often under intervention.

mod navigator;

use std::hash::{Hash, Hasher};
use std::io::Write;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{build_valid_env, Action, EnvConfig, ValidEnv};
use crate::scm::{CausalEdge, CausalGraph, Direction, EdgeStatus, Evidence, Provenance, StatusSet, VarId};

pub use navigator::{shortest_path_action, Navigator, OracleNavigator, PolicyNavigator, QTableNavigator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionConfig {
    /// Trials per arm.
    pub trials: usize,
    pub delta: f64,
    pub min_trials: usize,
    /// Navigation budget per trial.
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            delta: 0.5,
            min_trials: 5,
            max_steps: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Verified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Intervention,
    Baseline,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrialError {
    #[error("the agent did not reach the cause within {0} steps")]
    InterventionNotExecuted(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub epoch: usize,
    pub cause: String,
    pub effect: String,
    pub rule: Option<String>,
    pub required_action: Option<Action>,
    pub intervention_executed: usize,
    pub intervention_changed: usize,
    pub baseline_executed: usize,
    pub baseline_changed: usize,
    pub intervention_change_rate: f64,
    pub baseline_change_rate: f64,
    pub decision: Decision,
    pub note: Option<String>,
}

/// Frequency-comparison decision rule.
pub fn decide(intervention_rate: f64, baseline_rate: f64, executed_trials: usize, config: &InterventionConfig) -> Decision {
    if executed_trials < config.min_trials {
        return Decision::Inconclusive;
    }
    let diff = intervention_rate - baseline_rate;
    if diff >= config.delta {
        Decision::Verified
    } else if diff.abs() < config.delta {
        Decision::Refuted
    } else {
        Decision::Inconclusive
    }
}

/// Hypothesized edges ordered by (fewest trials, topological rank of the
/// cause, ids), truncated to `budget`.
pub fn select_edges_for_verification(graph: &CausalGraph, budget: usize) -> Vec<(VarId, VarId)> {
    select_edges_where(graph, budget, |_| true)
}

pub fn select_edges_where<F: Fn(&CausalEdge) -> bool>(graph: &CausalGraph, budget: usize, keep: F) -> Vec<(VarId, VarId)> {
    let rank = graph.topological_rank();
    let mut edges: Vec<&CausalEdge> = graph
        .edges_with(StatusSet::HYPOTHESIZED)
        .filter(|e| keep(e))
        .collect();
    edges.sort_by_key(|e| (e.evidence.total(), rank[e.src], e.src, e.dst));
    edges.into_iter().take(budget).map(|e| (e.src, e.dst)).collect()
}

/// True if a sandbox can be built for this edge.
pub fn is_interventable(graph: &CausalGraph, src: VarId, dst: VarId, base: &EnvConfig) -> bool {
    build_valid_env(graph.name_of(src), graph.name_of(dst), base, 0).is_ok()
}

/// One trial in a private copy of the sandbox. Returns whether the effect
/// increased at the step the arm's action was taken.
pub fn run_trial<N: Navigator>(sandbox: &ValidEnv, navigator: &mut N, arm: Arm, max_steps: u32) -> Result<bool, TrialError> {
    let mut env = sandbox.env.clone();
    let channel = sandbox.effect_channel();
    for _ in 0..=max_steps {
        let ready = match sandbox.facing_target {
            None => true,
            Some(c) => env.state().facing_cell() == Some(c),
        };
        if ready {
            let before = env.state().channel_value(channel);
            let action = match arm {
                Arm::Intervention => sandbox.required_action,
                Arm::Baseline => Action::Noop,
            };
            if env.step(action).is_err() {
                break;
            }
            return Ok(env.state().channel_value(channel) > before);
        }
        let target = sandbox.facing_target.expect("not ready implies a target");
        let a = navigator.next_action(&env, target);
        match env.step(a) {
            Ok(t) if !t.done => {}
            _ => break,
        }
    }
    Err(TrialError::InterventionNotExecuted(max_steps))
}

fn trial_seed(config: &InterventionConfig, epoch: usize, src: VarId, dst: VarId, k: usize, arm: Arm) -> u64 {
    let mut h = FnvHasher::default();
    (config.seed, epoch, src, dst, k, arm == Arm::Baseline).hash(&mut h);
    h.finish()
}

/// Runs both arms for one edge and returns the record (graph untouched).
pub fn verify_edge<N, F>(
    graph: &CausalGraph,
    src: VarId,
    dst: VarId,
    base: &EnvConfig,
    make_navigator: &F,
    config: &InterventionConfig,
    epoch: usize,
) -> InterventionRecord
where
    N: Navigator,
    F: Fn(&ValidEnv, u64) -> N,
{
    let (cause, effect) = (graph.name_of(src).to_string(), graph.name_of(dst).to_string());
    let mut record = InterventionRecord {
        epoch,
        cause: cause.clone(),
        effect: effect.clone(),
        rule: None,
        required_action: None,
        intervention_executed: 0,
        intervention_changed: 0,
        baseline_executed: 0,
        baseline_changed: 0,
        intervention_change_rate: 0.0,
        baseline_change_rate: 0.0,
        decision: Decision::Inconclusive,
        note: None,
    };
    let sandbox = match build_valid_env(&cause, &effect, base, config.seed) {
        Ok(s) => s,
        Err(e) => {
            record.note = Some(e.to_string());
            return record;
        }
    };
    record.rule = Some(sandbox.rule.to_string());
    record.required_action = Some(sandbox.required_action);
    for arm in [Arm::Intervention, Arm::Baseline] {
        let (mut executed, mut changed) = (0, 0);
        for k in 0..config.trials {
            let mut nav = make_navigator(&sandbox, trial_seed(config, epoch, src, dst, k, arm));
            if let Ok(c) = run_trial(&sandbox, &mut nav, arm, config.max_steps) {
                executed += 1;
                changed += usize::from(c);
            }
        }
        match arm {
            Arm::Intervention => {
                record.intervention_executed = executed;
                record.intervention_changed = changed;
            }
            Arm::Baseline => {
                record.baseline_executed = executed;
                record.baseline_changed = changed;
            }
        }
    }
    let rate = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    record.intervention_change_rate = rate(record.intervention_changed, record.intervention_executed);
    record.baseline_change_rate = rate(record.baseline_changed, record.baseline_executed);
    let executed = record.intervention_executed.min(record.baseline_executed);
    record.decision = decide(record.intervention_change_rate, record.baseline_change_rate, executed, config);
    record
}

/// Applies a record's decision and evidence to the graph.
pub fn apply_record(graph: &CausalGraph, record: &InterventionRecord) -> CausalGraph {
    let (Ok(src), Ok(dst)) = (graph.id_of(&record.cause), graph.id_of(&record.effect)) else {
        return graph.clone();
    };
    let Some(edge) = graph.edge(src, dst) else {
        return graph.clone();
    };
    let evidence = Evidence::new(
        record.intervention_changed as u64,
        (record.intervention_executed - record.intervention_changed) as u64,
    );
    let status = match record.decision {
        Decision::Verified => EdgeStatus::Verified,
        Decision::Refuted => EdgeStatus::Refuted,
        Decision::Inconclusive => edge.status,
    };
    graph
        .set_status(src, dst, status, evidence)
        .unwrap_or_else(|_| graph.clone())
}

/// One adapting stage: schedules up to `budget` interventable hypothesized
/// edges, verifies each and returns the repaired graph with all records.
/// Sandboxes are private, so nothing outside this call is mutated.
pub fn adapt_epoch<N, F>(
    graph: &CausalGraph,
    base: &EnvConfig,
    make_navigator: F,
    budget: usize,
    config: &InterventionConfig,
    epoch: usize,
) -> (CausalGraph, Vec<InterventionRecord>)
where
    N: Navigator,
    F: Fn(&ValidEnv, u64) -> N,
{
    let edges = select_edges_where(graph, budget, |e| is_interventable(graph, e.src, e.dst, base));
    let mut g = graph.clone();
    let mut records = Vec::with_capacity(edges.len());
    for (src, dst) in edges {
        let r = verify_edge(graph, src, dst, base, &make_navigator, config, epoch);
        g = apply_record(&g, &r);
        records.push(r);
    }
    (g, records)
}

/// Tests relations that extraction could not add because they would close a
/// cycle. When such a candidate is verified, hypothesized edges on the
/// conflicting paths that can never be tested are refuted, since under the
/// acyclic model they contradict the evidence, and the candidate is inserted
/// as verified. Testable conflicting edges are left to their own trials.
///
/// Returns the repaired graph, one record per tested candidate and the
/// candidates that are still blocked.
pub fn resolve_conflicts<N, F>(
    graph: &CausalGraph,
    candidates: &[(VarId, VarId, Provenance)],
    base: &EnvConfig,
    make_navigator: F,
    budget: usize,
    config: &InterventionConfig,
    epoch: usize,
) -> (CausalGraph, Vec<InterventionRecord>, Vec<(VarId, VarId, Provenance)>)
where
    N: Navigator,
    F: Fn(&ValidEnv, u64) -> N,
{
    let mut g = graph.clone();
    let mut records = Vec::new();
    let mut pending = Vec::new();
    for &(src, dst, source) in candidates {
        if g.edge(src, dst).is_some() || !is_interventable(&g, src, dst, base) {
            continue;
        }
        if let Ok(next) = g.add_relation(src, dst, source) {
            // The conflict is gone; the ordinary schedule will test it.
            g = next;
            continue;
        }
        if records.len() >= budget {
            pending.push((src, dst, source));
            continue;
        }
        let mut r = verify_edge(&g, src, dst, base, &make_navigator, config, epoch);
        if r.decision == Decision::Verified {
            let from_dst = g.reachability(dst, Direction::Descendants, StatusSet::ACTIVE).unwrap_or_default();
            let to_src = g.reachability(src, Direction::Ancestors, StatusSet::ACTIVE).unwrap_or_default();
            let blockers: Vec<(VarId, VarId)> = g
                .edges_with(StatusSet::HYPOTHESIZED)
                .filter(|e| (e.src == dst || from_dst.contains(&e.src)) && (e.dst == src || to_src.contains(&e.dst)))
                .filter(|e| !is_interventable(&g, e.src, e.dst, base))
                .map(|e| (e.src, e.dst))
                .collect();
            for &(a, b) in &blockers {
                g = g.set_status(a, b, EdgeStatus::Refuted, Evidence::default()).unwrap_or(g);
            }
            if !blockers.is_empty() {
                let names: Vec<String> = blockers
                    .iter()
                    .map(|&(a, b)| format!("{} -> {}", g.name_of(a), g.name_of(b)))
                    .collect();
                r.note = Some(format!("refuted untestable conflicting edges: {}", names.join(", ")));
            }
            match g.add_relation(src, dst, source) {
                Ok(next) => g = apply_record(&next, &r),
                Err(_) => pending.push((src, dst, source)),
            }
        }
        records.push(r);
    }
    (g, records, pending)
}

pub fn write_records<W: Write>(mut w: W, records: &[InterventionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
