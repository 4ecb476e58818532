//! Ways of walking the agent to the cell it must face before intervening.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{act, encode, ActMode, ActScratch, CausalContext, FeatureLayout, PolicyParameters, QTable};
use crate::goals::Goal;
use crate::gridworld::{Action, Cell, Facing, GridWorld, Pos, WorldState};
use crate::scalar::Scalar;

/// Chooses movement actions until the agent faces `target`.
pub trait Navigator {
    fn next_action(&mut self, env: &GridWorld, target: Cell) -> Action;
}

/// Shortest path over (position, facing) by breadth-first search.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleNavigator;

/// First action of a shortest action sequence that leaves the agent facing
/// `target`, or `None` if it already does or cannot.
pub fn shortest_path_action(state: &WorldState, target: Cell) -> Option<Action> {
    let faces = |pos: Pos, f: Facing| {
        let (dx, dy) = f.delta();
        state.cell((pos.0 + dx, pos.1 + dy)) == Some(target)
    };
    let start = (state.agent.pos, state.agent.facing);
    if faces(start.0, start.1) {
        return None;
    }
    let w = state.width as usize;
    let idx = |p: Pos, f: Facing| (p.1 as usize * w + p.0 as usize) * 4 + f.index();
    let mut seen = vec![false; state.cells.len() * 4];
    seen[idx(start.0, start.1)] = true;
    let mut queue = VecDeque::from([(start.0, start.1, None::<Action>)]);
    while let Some((pos, _, via)) = queue.pop_front() {
        for f in Facing::ALL {
            let (dx, dy) = f.delta();
            let step = (pos.0 + dx, pos.1 + dy);
            let npos = if state.is_free(step) { step } else { pos };
            let k = idx(npos, f);
            if seen[k] {
                continue;
            }
            seen[k] = true;
            let a = via.unwrap_or(Action::toward(f));
            if faces(npos, f) {
                return Some(a);
            }
            queue.push_back((npos, f, Some(a)));
        }
    }
    None
}

impl Navigator for OracleNavigator {
    fn next_action(&mut self, env: &GridWorld, target: Cell) -> Action {
        shortest_path_action(env.state(), target).unwrap_or(Action::Noop)
    }
}

/// Samples actions from a frozen policy, conditioned on a fixed goal.
pub struct PolicyNavigator<'a, T> {
    params: &'a PolicyParameters<T>,
    layout: FeatureLayout,
    goal: Goal,
    context: CausalContext,
    rng: ChaCha8Rng,
    scratch: ActScratch<T>,
    features: Vec<T>,
}

impl<'a, T: Scalar> PolicyNavigator<'a, T> {
    pub fn new(params: &'a PolicyParameters<T>, layout: FeatureLayout, goal: Goal, context: CausalContext, seed: u64) -> Self {
        Self {
            params,
            layout,
            goal,
            context,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scratch: ActScratch::default(),
            features: Vec::new(),
        }
    }
}

impl<T: Scalar> Navigator for PolicyNavigator<'_, T> {
    fn next_action(&mut self, env: &GridWorld, _target: Cell) -> Action {
        encode(&self.layout, &env.observe(), Some(&self.goal), &self.context, &mut self.features);
        act(self.params, &self.features, ActMode::Sample, &mut self.rng, &mut self.scratch)
            .map(|o| o.action)
            .unwrap_or(Action::Noop)
    }
}

/// Greedy actions from a learned Q-table.
pub struct QTableNavigator<'a> {
    pub table: &'a QTable,
}

impl Navigator for QTableNavigator<'_> {
    fn next_action(&mut self, env: &GridWorld, _target: Cell) -> Action {
        self.table.greedy(env.state())
    }
}
