//! Observation, goal and causal-graph context flattened into one input vector.

use crate::goals::{visible_variables, Goal};
use crate::gridworld::{Channel, Facing, Item, Observation, RuleTable, ViewCell, MAX_ITEM_COUNT, MAX_STAT};
use crate::scalar::Scalar;
use crate::scm::{CausalGraph, StatusSet};

/// Parents of every variable under hypothesized or verified edges, as bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CausalContext {
    parents: Vec<u32>,
}

impl CausalContext {
    pub fn empty() -> Self {
        Self {
            parents: vec![0; RuleTable::standard().variables().len()],
        }
    }

    pub fn from_graph(graph: &CausalGraph) -> Self {
        let mut parents = vec![0u32; graph.len()];
        for e in graph.edges_with(StatusSet::ACTIVE) {
            parents[e.dst] |= 1 << e.src;
        }
        Self { parents }
    }

    pub fn parents(&self, v: usize) -> u32 {
        self.parents.get(v).copied().unwrap_or(0)
    }
}

/// Sizes of each block of the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub view_cells: usize,
}

impl FeatureLayout {
    pub fn new(view_width: u32, view_height: u32) -> Self {
        Self {
            view_cells: (view_width * view_height) as usize,
        }
    }

    pub fn n_variables() -> usize {
        RuleTable::standard().variables().len()
    }

    pub fn view_len(&self) -> usize {
        self.view_cells * ViewCell::CLASSES
    }

    /// Offset of the causal-context block.
    pub fn context_offset(&self) -> usize {
        self.view_len() + Item::COUNT + 3 + Facing::ALL.len() + Goal::count()
    }

    pub fn len(&self) -> usize {
        self.context_offset() + Self::n_variables()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Bit per variable: present in view or held.
pub fn present_variables(obs: &Observation) -> u32 {
    let mut mask = visible_variables(obs);
    for (i, v) in RuleTable::standard().variables().iter().enumerate() {
        if let Channel::Inventory(item) = v.channel {
            if obs.inventory.get(item) > 0 {
                mask |= 1 << i;
            }
        }
    }
    mask
}

/// Writes the features for `obs` into `out` (cleared first). Without a goal
/// the goal and context blocks stay zero.
pub fn encode<T: Scalar>(
    layout: &FeatureLayout,
    obs: &Observation,
    goal: Option<&Goal>,
    context: &CausalContext,
    out: &mut Vec<T>,
) {
    assert_eq!(obs.view.len(), layout.view_cells, "observation does not match layout");
    out.clear();
    out.resize(layout.len(), T::zero());
    for (k, cell) in obs.view.iter().enumerate() {
        out[k * ViewCell::CLASSES + cell.class()] = T::one();
    }
    let mut at = layout.view_len();
    let inv_scale = T::of(1.0 / f64::from(MAX_ITEM_COUNT));
    for item in Item::ALL {
        out[at] = T::of(f64::from(obs.inventory.get(item))) * inv_scale;
        at += 1;
    }
    let stat_scale = T::of(1.0 / f64::from(MAX_STAT));
    for v in [obs.vitals.health, obs.vitals.food, obs.vitals.drink] {
        out[at] = T::of(f64::from(v)) * stat_scale;
        at += 1;
    }
    out[at + obs.facing.index()] = T::one();
    at += Facing::ALL.len();
    if let Some(g) = goal {
        out[at + g.id] = T::one();
        if let Some(target) = g.variable() {
            let bits = context.parents(target) & present_variables(obs);
            let base = layout.context_offset();
            for v in 0..FeatureLayout::n_variables() {
                if bits & (1 << v) != 0 {
                    out[base + v] = T::one();
                }
            }
        }
    }
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;
    use crate::gridworld::{EnvConfig, GridWorld};
    use crate::scm::{EdgeStatus, Evidence, Provenance};

    fn setup() -> (FeatureLayout, Observation) {
        let mut c = EnvConfig::default();
        c.view_width = 3;
        c.view_height = 3;
        c.zombies.count = 0;
        let mut env = GridWorld::from_layout(c, &["...", ".AT", "..."], 0).unwrap();
        env.state_mut().inventory.set(Item::Wood, 3);
        (FeatureLayout::new(3, 3), env.observe())
    }

    #[test]
    fn fixed_length_and_blocks() {
        let (layout, obs) = setup();
        let mut f: Vec<f64> = Vec::new();
        encode(&layout, &obs, None, &CausalContext::empty(), &mut f);
        assert_eq!(f.len(), layout.len());
        assert_eq!(f[..layout.view_len()].iter().sum::<f64>(), 9.0);
        assert!((f[layout.view_len()] - 3.0 / 9.0).abs() < 1e-15);
        assert!(f[layout.context_offset() - Goal::count()..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn refuting_an_edge_only_touches_its_context_bit() {
        let (layout, obs) = setup();
        let table = RuleTable::standard();
        let (tree, wood, pick) = (
            table.variable_id("tree").unwrap(),
            table.variable_id("wood").unwrap(),
            table.variable_id("wood_pickaxe").unwrap(),
        );
        let g = table
            .empty_graph()
            .add_relation(tree, pick, Provenance::Oracle)
            .unwrap()
            .add_relation(wood, pick, Provenance::Oracle)
            .unwrap();
        let refuted = g.set_status(tree, pick, EdgeStatus::Refuted, Evidence::default()).unwrap();
        let goal = Goal::for_variable(pick);
        let (mut a, mut b) = (Vec::<f64>::new(), Vec::<f64>::new());
        encode(&layout, &obs, Some(&goal), &CausalContext::from_graph(&g), &mut a);
        encode(&layout, &obs, Some(&goal), &CausalContext::from_graph(&refuted), &mut b);
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diff, vec![layout.context_offset() + tree]);
        assert_eq!(a[layout.context_offset() + wood], 1.0);
    }
}
