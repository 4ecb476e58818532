//! Sub-goal planning over the causal graph, text embeddings and reward shaping.

mod embed;

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::gridworld::{
    Achievement, AchievementSet, Channel, Inventory, Observation, RuleTable, ViewCell,
};
use crate::scalar::Scalar;
use crate::scm::{CausalGraph, Direction, StatusSet, VarId};

pub use embed::{cosine, embed, Embedder, HashedBagOfTokens, DEFAULT_EMBED_DIM};

pub const EXPLORE: &str = "explore";
pub const DEFAULT_GOAL_HORIZON: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Goal {
    /// Variable id of the target, or the variable count for "explore".
    pub id: usize,
    pub target: String,
    pub text: String,
    pub horizon: u32,
}

impl Goal {
    pub fn for_variable(id: VarId) -> Goal {
        let spec = &RuleTable::standard().variables()[id];
        Goal {
            id,
            target: spec.name.to_string(),
            text: spec.goal_phrase.to_string(),
            horizon: DEFAULT_GOAL_HORIZON,
        }
    }

    pub fn explore() -> Goal {
        Goal {
            id: Self::count() - 1,
            target: EXPLORE.to_string(),
            text: EXPLORE.to_string(),
            horizon: DEFAULT_GOAL_HORIZON,
        }
    }

    /// Number of distinct goal ids.
    pub fn count() -> usize {
        RuleTable::standard().variables().len() + 1
    }

    pub fn is_explore(&self) -> bool {
        self.target == EXPLORE
    }

    /// Target variable id, if the goal names one.
    pub fn variable(&self) -> Option<VarId> {
        (!self.is_explore()).then_some(self.id)
    }

    /// Parses a goal phrase or bare variable name.
    pub fn from_text(text: &str) -> Option<Goal> {
        let t = text.trim().to_lowercase();
        if t == EXPLORE {
            return Some(Goal::explore());
        }
        let table = RuleTable::standard();
        table
            .variables()
            .iter()
            .position(|v| v.goal_phrase == t || v.name == t)
            .map(Goal::for_variable)
    }
}

/// What the planner knows about the agent's progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlannerState {
    pub unlocked: AchievementSet,
    /// Achievements still worth pursuing; locked ones outside this set are ignored.
    pub targets: AchievementSet,
    pub inventory: Inventory,
    /// Bit per variable id: a placed object of that kind is in view.
    pub visible: u32,
}

impl PlannerState {
    pub fn new(unlocked: AchievementSet, inventory: Inventory) -> Self {
        Self {
            unlocked,
            targets: Achievement::ALL.into_iter().collect(),
            inventory,
            visible: 0,
        }
    }

    pub fn from_observation(obs: &Observation, targets: AchievementSet) -> Self {
        Self {
            unlocked: obs.unlocked,
            targets,
            inventory: obs.inventory,
            visible: visible_variables(obs),
        }
    }

    pub fn sees(&self, v: VarId) -> bool {
        self.visible & (1 << v) != 0
    }

    /// Whether variable `v` currently counts as in hand.
    ///
    /// Resources, entities and vitals are taken as given. Items must be held,
    /// placed stations must be in view.
    pub fn satisfied(&self, v: VarId) -> bool {
        match RuleTable::standard().variables()[v].channel {
            Channel::Inventory(item) => self.inventory.get(item) > 0,
            Channel::Cell(c) if is_station(c) => self.sees(v),
            Channel::Cell(_) | Channel::Stat(_) | Channel::Zombies => true,
        }
    }

    /// Whether the agent now holds or sees what `goal` names. Goals on raw
    /// resources, vitals or zombies never count as reached; they end on an
    /// unlock or when their horizon runs out.
    pub fn reached(&self, goal: &Goal) -> bool {
        let Some(v) = goal.variable() else {
            return false;
        };
        match RuleTable::standard().variables()[v].channel {
            Channel::Inventory(item) => self.inventory.get(item) > 0,
            Channel::Cell(c) if is_station(c) => self.sees(v),
            _ => false,
        }
    }
}

fn is_station(c: crate::gridworld::Cell) -> bool {
    use crate::gridworld::Cell;
    matches!(c, Cell::Table | Cell::Furnace | Cell::Plant)
}

/// Bitmask of variables whose object is visible in the observation window.
pub fn visible_variables(obs: &Observation) -> u32 {
    let table = RuleTable::standard();
    let mut mask = 0u32;
    for cell in &obs.view {
        let channel = match *cell {
            ViewCell::Terrain(c) => Channel::Cell(c),
            ViewCell::Zombie => Channel::Zombies,
            ViewCell::OutOfBounds => continue,
        };
        if let Some(i) = table.variables().iter().position(|v| v.channel == channel) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Edges the planner trusts: verified ones if there are any, else hypothesized.
pub fn planning_statuses(graph: &CausalGraph) -> StatusSet {
    if graph.edges_with(StatusSet::VERIFIED).next().is_some() {
        StatusSet::VERIFIED
    } else {
        StatusSet::HYPOTHESIZED
    }
}

/// Picks the next sub-goal along the causal chain of the most promising
/// locked achievement.
pub fn plan_subgoal(graph: &CausalGraph, state: &PlannerState) -> Goal {
    let table = RuleTable::standard();
    let statuses = planning_statuses(graph);
    let best = state
        .targets
        .iter()
        .filter(|a| !state.unlocked.contains(*a))
        .filter_map(|a| {
            let target = table.variable_id(a.target_variable())?;
            let ancestors = graph
                .reachability(target, Direction::Ancestors, statuses)
                .ok()?;
            let mut open: Vec<VarId> = ancestors
                .iter()
                .copied()
                .filter(|&v| !state.satisfied(v))
                .collect();
            open.push(target);
            Some((ancestors.len(), open, a))
        })
        .min_by_key(|(depth, open, a)| (Reverse(*depth), open.len(), *a));
    let Some((_, open, _)) = best else {
        return Goal::explore();
    };
    let order = graph
        .topological_order(statuses)
        .expect("planning subgraph is acyclic");
    let next = order
        .into_iter()
        .find(|v| open.contains(v))
        .expect("open set is non-empty");
    Goal::for_variable(next)
}

/// Shaping coefficient with optional linear annealing to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    pub lambda: f64,
    pub anneal_steps: Option<u64>,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            anneal_steps: None,
        }
    }
}

impl ShapingConfig {
    pub fn lambda_at(&self, step: u64) -> f64 {
        match self.anneal_steps {
            Some(n) if n > 0 => self.lambda * (1.0 - (step as f64 / n as f64).min(1.0)),
            _ => self.lambda,
        }
    }
}

/// `r_env + lambda * cos(goal, observation)`. Exactly `r_env` when `lambda` is zero.
pub fn shaped_reward<T: Scalar>(r_env: T, lambda: T, goal: &[T], observation: &[T]) -> T {
    if lambda == T::zero() {
        return r_env;
    }
    r_env + lambda * cosine(goal, observation)
}

/// Text-level convenience wrapper around [`shaped_reward`].
pub fn shaped_reward_text(r_env: f64, goal: &Goal, observation_text: &str, config: &ShapingConfig) -> f64 {
    let g: Vec<f64> = embed(&goal.text, DEFAULT_EMBED_DIM);
    let o: Vec<f64> = embed(observation_text, DEFAULT_EMBED_DIM);
    shaped_reward(r_env, config.lambda, &g, &o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Item;
    use crate::scm::{EdgeStatus, Evidence, Provenance};

    fn verified_chain(pairs: &[(&str, &str)]) -> CausalGraph {
        let table = RuleTable::standard();
        let mut g = table.empty_graph();
        for (a, b) in pairs {
            let (s, d) = (table.variable_id(a).unwrap(), table.variable_id(b).unwrap());
            g = g.add_relation(s, d, Provenance::Manual).unwrap();
            g = g.set_status(s, d, EdgeStatus::Verified, Evidence::default()).unwrap();
        }
        g
    }

    fn only(a: Achievement) -> PlannerState {
        let mut s = PlannerState::new(AchievementSet::default(), Inventory::default());
        s.targets = [a].into_iter().collect();
        s
    }

    #[test]
    fn wood_first_then_pickaxe() {
        let g = verified_chain(&[("tree", "wood"), ("wood", "wood_pickaxe")]);
        let mut s = only(Achievement::MakeWoodPickaxe);
        assert_eq!(plan_subgoal(&g, &s).text, "obtaining wood");
        s.inventory.set(Item::Wood, 1);
        assert_eq!(plan_subgoal(&g, &s).text, "make wood_pickaxe");
    }

    #[test]
    fn everything_unlocked_means_explore() {
        let g = verified_chain(&[("tree", "wood")]);
        let all: AchievementSet = Achievement::ALL.into_iter().collect();
        let s = PlannerState::new(all, Inventory::default());
        assert_eq!(plan_subgoal(&g, &s), Goal::explore());
        assert_eq!(Goal::explore().id, Goal::count() - 1);
    }

    #[test]
    fn deepest_achievement_wins() {
        let table = RuleTable::standard();
        let mut g = table.empty_graph();
        for (a, b) in table.ground_truth_relations() {
            let (s, d) = (table.variable_id(a).unwrap(), table.variable_id(b).unwrap());
            g = g.add_relation(s, d, Provenance::Oracle).unwrap();
        }
        let s = PlannerState::new(AchievementSet::default(), Inventory::default());
        // Hypothesized edges only: the iron pickaxe chain starts with wood.
        assert_eq!(plan_subgoal(&g, &s).target, "wood");
    }

    #[test]
    fn refuted_edges_are_ignored() {
        let g = verified_chain(&[("tree", "wood"), ("wood", "wood_pickaxe")]);
        let table = RuleTable::standard();
        let (t, s) = (table.variable_id("tree").unwrap(), table.variable_id("stone").unwrap());
        let with_refuted = g
            .add_relation(t, s, Provenance::Oracle)
            .unwrap()
            .set_status(t, s, EdgeStatus::Refuted, Evidence::default())
            .unwrap();
        let st = only(Achievement::MakeWoodPickaxe);
        assert_eq!(plan_subgoal(&g, &st), plan_subgoal(&with_refuted, &st));
    }

    #[test]
    fn goal_text_round_trip() {
        for v in 0..RuleTable::standard().variables().len() {
            let g = Goal::for_variable(v);
            assert_eq!(Goal::from_text(&g.text), Some(g));
        }
        assert_eq!(Goal::from_text("obtain dragon scale"), None);
    }

    #[test]
    fn shaping_examples() {
        let same: Vec<f64> = embed("obtaining wood", 256);
        assert!((shaped_reward(0.0, 0.1, &same, &same) - 0.1).abs() < 1e-12);
        let other: Vec<f64> = embed("zzz qqq", 256);
        let c = cosine(&same, &other);
        if c == 0.0 {
            assert_eq!(shaped_reward(0.25, 0.1, &same, &other), 0.25);
        }
        for r in [0.0, -0.1, 1.0, 1e-300, -0.0] {
            assert_eq!(shaped_reward(r, 0.0, &same, &same).to_bits(), r.to_bits());
        }
    }

    #[test]
    fn annealing() {
        let c = ShapingConfig {
            lambda: 0.1,
            anneal_steps: Some(100),
        };
        assert_eq!(c.lambda_at(0), 0.1);
        assert!((c.lambda_at(50) - 0.05).abs() < 1e-15);
        assert_eq!(c.lambda_at(500), 0.0);
    }
}
