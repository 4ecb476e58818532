//! Hypothesis generation: relation extraction and goal proposals from text.

mod remote;
mod template;

use std::collections::BTreeSet;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goals::{plan_subgoal, Goal, PlannerState};
use crate::gridworld::RuleTable;
use crate::scm::{CausalGraph, Provenance, ScmError, StatusSet};

pub use remote::{ChatRequest, ChatTransport, HttpTransport, RemoteConfig, RemoteExtractor, API_KEY_ENV};
pub use template::{ChatMessage, PromptTemplate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("remote model unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("prompt template: {0}")]
    Template(String),
    #[error("invalid extractor config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub cause: String,
    pub effect: String,
    pub source: Provenance,
}

/// Relations keyed by `(cause, effect)`; the first provenance seen wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationSet {
    relations: Vec<Relation>,
}

impl RelationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the pair was already present.
    pub fn insert(&mut self, cause: &str, effect: &str, source: Provenance) -> bool {
        if self.contains(cause, effect) {
            return false;
        }
        self.relations.push(Relation {
            cause: cause.to_string(),
            effect: effect.to_string(),
            source,
        });
        true
    }

    pub fn contains(&self, cause: &str, effect: &str) -> bool {
        self.relations
            .iter()
            .any(|r| r.cause == cause && r.effect == effect)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn pairs(&self) -> BTreeSet<(String, String)> {
        self.relations
            .iter()
            .map(|r| (r.cause.clone(), r.effect.clone()))
            .collect()
    }

    /// One `cause -> effect` line per relation.
    pub fn render(&self) -> String {
        self.relations
            .iter()
            .map(|r| format!("{} -> {}\n", r.cause, r.effect))
            .collect()
    }

    /// Adds every relation to the graph as hypothesized. Relations that would
    /// close a cycle are returned rather than dropped silently.
    pub fn apply(&self, graph: &CausalGraph) -> Result<(CausalGraph, Vec<Relation>), ScmError> {
        let mut g = graph.clone();
        let mut rejected = Vec::new();
        for r in &self.relations {
            let (s, d) = (g.id_of(&r.cause)?, g.id_of(&r.effect)?);
            match g.add_relation(s, d, r.source) {
                Ok(next) => g = next,
                Err(ScmError::CycleCreated { .. }) => rejected.push(r.clone()),
                Err(e) => return Err(e),
            }
        }
        Ok((g, rejected))
    }
}

impl FromIterator<(String, String, Provenance)> for RelationSet {
    fn from_iter<I: IntoIterator<Item = (String, String, Provenance)>>(iter: I) -> Self {
        let mut s = RelationSet::new();
        for (c, e, p) in iter {
            s.insert(&c, &e, p);
        }
        s
    }
}

/// Parses `<name> -> <name>` lines. Blank lines are skipped; anything else
/// that does not parse, names an unknown variable or is a self-loop is
/// counted as rejected.
pub fn parse_relation_lines(text: &str, vocabulary: &[String], source: Provenance) -> (RelationSet, usize) {
    let mut set = RelationSet::new();
    let mut rejected = 0;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once("->").and_then(|(a, b)| {
            let (a, b) = (a.trim(), b.trim());
            let known = |n: &str| vocabulary.iter().any(|v| v == n);
            (known(a) && known(b) && a != b).then_some((a, b))
        });
        match parsed {
            Some((a, b)) => {
                set.insert(a, b, source);
            }
            None => rejected += 1,
        }
    }
    (set, rejected)
}

/// Relations plus the number of reply lines that were thrown away.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub relations: RelationSet,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalChoice {
    pub goal: Goal,
    /// The proposer's reply was invalid and the planner's goal was used instead.
    pub fell_back: bool,
}

/// A source of causal hypotheses and goal proposals.
pub trait Extractor: Send + Sync {
    fn extract_relations(&self, observation_text: &str, vocabulary: &[String]) -> Result<Extraction, ExtractionError>;

    fn generate_goal(
        &self,
        graph: &CausalGraph,
        state: &PlannerState,
        prompt: &PromptTemplate,
    ) -> Result<GoalChoice, ExtractionError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    /// Chance of injecting one false relation per true relation.
    pub p_false: f64,
    /// Chance of dropping each true relation.
    pub p_miss: f64,
    pub noise_seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            p_false: 0.3,
            p_miss: 0.2,
            noise_seed: 0,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        for (name, p) in [("p_false", self.p_false), ("p_miss", self.p_miss)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ExtractionError::InvalidConfig(format!("{name} = {p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Noisy stand-in for a language model, backed by the rule table's ground truth.
///
/// The noise stream is seeded from `noise_seed` and the observation text, so
/// the same call always gives the same answer while different observations
/// miss different relations.
#[derive(Debug, Clone)]
pub struct ScriptedExtractor {
    config: ExtractorConfig,
    truth: Vec<(String, String)>,
}

impl ScriptedExtractor {
    pub fn new(config: ExtractorConfig) -> Result<Self, ExtractionError> {
        let truth = RuleTable::standard()
            .ground_truth_relations()
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        Self::with_truth(config, truth)
    }

    pub fn with_truth(config: ExtractorConfig, truth: Vec<(String, String)>) -> Result<Self, ExtractionError> {
        config.validate()?;
        Ok(Self { config, truth })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    fn rng_for(&self, text: &str) -> ChaCha8Rng {
        let mut h = FnvHasher::default();
        h.write(text.as_bytes());
        ChaCha8Rng::seed_from_u64(self.config.noise_seed ^ h.finish())
    }
}

impl Extractor for ScriptedExtractor {
    fn extract_relations(&self, observation_text: &str, vocabulary: &[String]) -> Result<Extraction, ExtractionError> {
        if vocabulary.is_empty() {
            return Err(ExtractionError::EmptyVocabulary);
        }
        let mut rng = self.rng_for(observation_text);
        let known = |n: &str| vocabulary.iter().any(|v| v == n);
        let is_true = |a: &str, b: &str| self.truth.iter().any(|(x, y)| x == a && y == b);
        let mut out = RelationSet::new();
        for (cause, effect) in self.truth.iter().filter(|(a, b)| known(a) && known(b)) {
            let missed = rng.random::<f64>() < self.config.p_miss;
            let inject = rng.random::<f64>() < self.config.p_false;
            if !missed {
                out.insert(cause, effect, Provenance::Oracle);
            }
            if inject && vocabulary.len() > 1 {
                for _ in 0..64 {
                    let a = &vocabulary[rng.random_range(0..vocabulary.len())];
                    let b = &vocabulary[rng.random_range(0..vocabulary.len())];
                    if a != b && !is_true(a, b) {
                        out.insert(a, b, Provenance::Oracle);
                        break;
                    }
                }
            }
        }
        Ok(Extraction {
            relations: out,
            rejected: 0,
        })
    }

    fn generate_goal(
        &self,
        graph: &CausalGraph,
        state: &PlannerState,
        _prompt: &PromptTemplate,
    ) -> Result<GoalChoice, ExtractionError> {
        Ok(GoalChoice {
            goal: plan_subgoal(graph, state),
            fell_back: false,
        })
    }
}

/// Active edges of `graph` as relation lines, or `(none)`.
pub fn graph_lines(graph: &CausalGraph, statuses: StatusSet) -> String {
    let lines: String = graph
        .edges_with(statuses)
        .map(|e| format!("{} -> {}\n", graph.name_of(e.src), graph.name_of(e.dst)))
        .collect();
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.trim_end().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vec<String> {
        RuleTable::standard().vocabulary()
    }

    #[test]
    fn parse_examples() {
        let v = vocab();
        let (s, r) = parse_relation_lines("tree -> wood\nwood->wood_pickaxe", &v, Provenance::RemoteModel);
        assert_eq!((s.len(), r), (2, 0));
        let (s, r) = parse_relation_lines("dragon -> wood", &v, Provenance::RemoteModel);
        assert_eq!((s.len(), r), (0, 1));
        let (s, r) = parse_relation_lines("tree -> tree", &v, Provenance::RemoteModel);
        assert_eq!((s.len(), r), (0, 1));
        let (s, r) = parse_relation_lines("tree -> wood\n\n  tree ->  wood \nsure! here you go", &v, Provenance::RemoteModel);
        assert_eq!((s.len(), r), (1, 1));
        let (s, r) = parse_relation_lines("tree -> wood -> stone", &v, Provenance::RemoteModel);
        assert_eq!((s.len(), r), (0, 1));
    }

    #[test]
    fn noiseless_oracle_is_ground_truth() {
        let x = ScriptedExtractor::new(ExtractorConfig {
            p_false: 0.0,
            p_miss: 0.0,
            noise_seed: 3,
        })
        .unwrap();
        let got = x.extract_relations("anything", &vocab()).unwrap().relations;
        let truth: Vec<_> = RuleTable::standard()
            .ground_truth_relations()
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let got_pairs: Vec<_> = got.iter().map(|r| (r.cause.clone(), r.effect.clone())).collect();
        assert_eq!(got_pairs, truth);
    }

    #[test]
    fn full_miss_leaves_only_false_edges() {
        let x = ScriptedExtractor::new(ExtractorConfig {
            p_false: 0.5,
            p_miss: 1.0,
            noise_seed: 9,
        })
        .unwrap();
        let truth = RuleTable::standard().ground_truth_relations();
        let got = x.extract_relations("obs", &vocab()).unwrap().relations;
        assert!(got.iter().all(|r| !truth.contains(&(r.cause.as_str(), r.effect.as_str()))));
    }

    #[test]
    fn oracle_is_deterministic() {
        let x = ScriptedExtractor::new(ExtractorConfig::default()).unwrap();
        let a = x.extract_relations("objects:\ntree at (+1,0)", &vocab()).unwrap();
        let b = x.extract_relations("objects:\ntree at (+1,0)", &vocab()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_vocabulary() {
        let x = ScriptedExtractor::new(ExtractorConfig::default()).unwrap();
        assert_eq!(x.extract_relations("o", &[]), Err(ExtractionError::EmptyVocabulary));
    }

    #[test]
    fn bad_probabilities() {
        let c = ExtractorConfig {
            p_false: 1.5,
            ..Default::default()
        };
        assert!(ScriptedExtractor::new(c).is_err());
    }

    #[test]
    fn apply_reports_cycles() {
        let g = RuleTable::standard().empty_graph();
        let mut s = RelationSet::new();
        s.insert("tree", "wood", Provenance::Oracle);
        s.insert("wood", "tree", Provenance::Oracle);
        let (g2, rejected) = s.apply(&g).unwrap();
        assert_eq!(g2.edge_count(), 1);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].cause, "wood");
    }
}
