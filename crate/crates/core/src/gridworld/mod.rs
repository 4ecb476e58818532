//! Mini survival gridworld: generation, dynamics, observations, sandboxes.

mod config;
mod observation;
mod rules;
mod sandbox;
mod trace;
mod types;
mod world;

pub use config::{Densities, EnvConfig, RewardConfig, VitalsConfig, ZombieConfig};
pub use observation::{render_text, Observation, ViewCell};
pub use rules::{Channel, Effect, InputRole, Rule, RuleTable, Target, VariableSpec};
pub use sandbox::{build_valid_env, ValidEnv};
pub use trace::{read_trace, record_episode, write_trace, TraceRecord};
pub use types::{
    Achievement, AchievementSet, Action, Cell, Facing, Inventory, Item, Stat, Vitals,
    MAX_ITEM_COUNT, MAX_STAT,
};
pub use world::{Agent, GridWorld, Pos, Transition, WorldState, Zombie};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("{cause} -> {effect} is not interventable: {reason}")]
    NotInterventable {
        cause: String,
        effect: String,
        reason: String,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}
