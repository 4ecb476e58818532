//! Goal-conditioned policy: features, actor-critic network, PPO, tabular Q.

mod checkpoint;
mod features;
mod mlp;
mod policy;
mod ppo;
mod tabular;

use thiserror::Error;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_HEADER};
pub use features::{encode, present_variables, CausalContext, FeatureLayout};
pub use mlp::{Activations, Mlp};
pub use policy::{act, action_probabilities, log_softmax, state_value, ActMode, ActOutput, ActScratch, PolicyParameters};
pub use ppo::{
    compute_gae, normalize, surrogate_grad, surrogate_loss, Adam, Batch, Gradients, LossTerms, LossWeights,
    RolloutBuffer, Trainer, TrainerConfig, UpdateMetrics,
};
pub use tabular::{tabular_learn, QTable, TabularConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("policy parameters are not finite")]
    NonFiniteParameters,
    #[error("loss is not finite; update abandoned")]
    NonFiniteLoss,
    #[error("input sequences have different lengths")]
    LengthMismatch,
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
