//! One-step Q-learning over exact world states, for small test maps.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{Achievement, Action, GridWorld, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            alpha: 0.5,
            gamma: 0.95,
            epsilon: 0.5,
            max_steps: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    q: HashMap<u64, [f64; Action::COUNT]>,
}

impl QTable {
    /// Agent pose, inventory and terrain identify the state.
    pub fn key(state: &WorldState) -> u64 {
        let mut h = FnvHasher::default();
        state.agent.pos.hash(&mut h);
        state.agent.facing.hash(&mut h);
        state.inventory.hash(&mut h);
        state.cells.hash(&mut h);
        h.finish()
    }

    pub fn values(&self, state: &WorldState) -> [f64; Action::COUNT] {
        self.q.get(&Self::key(state)).copied().unwrap_or([0.0; Action::COUNT])
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, state: &WorldState) -> Action {
        let v = self.values(state);
        let best = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        Action::from_index(best).expect("index in range")
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.q.values().flat_map(|row| row.iter().copied())
    }
}

/// Learns to unlock `goal`. `make_env(episode)` supplies each episode's start.
/// Reward is 1 on unlocking `goal`, which ends the episode.
pub fn tabular_learn<F: FnMut(usize) -> GridWorld>(mut make_env: F, goal: Achievement, config: &TabularConfig) -> QTable {
    let mut table = QTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for episode in 0..config.episodes {
        let mut env = make_env(episode);
        for _ in 0..config.max_steps {
            let s = QTable::key(env.state());
            let row = table.q.get(&s).copied().unwrap_or([0.0; Action::COUNT]);
            let a = if rng.random::<f64>() < config.epsilon {
                rng.random_range(0..Action::COUNT)
            } else {
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> = (0..Action::COUNT).filter(|&i| row[i] == best).collect();
                ties[rng.random_range(0..ties.len())]
            };
            let Ok(t) = env.step(Action::ALL[a]) else { break };
            let reached = t.unlocked.contains(&goal);
            let r = if reached { 1.0 } else { 0.0 };
            let terminal = reached || t.done;
            let next_best = if terminal {
                0.0
            } else {
                table
                    .q
                    .get(&QTable::key(env.state()))
                    .map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            let entry = table.q.entry(s).or_insert([0.0; Action::COUNT]);
            entry[a] += config.alpha * (r + config.gamma * next_best - entry[a]);
            if terminal {
                break;
            }
        }
    }
    table
}
