//! Causal-graph guided reinforcement learning in a small crafting gridworld.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod agent;
pub mod extraction;
pub mod goals;
pub mod gridworld;
pub mod intervention;
pub mod orchestrator;
pub mod scalar;
pub mod scm;

/// Policy parameters in double precision, used by gradient checks.
pub type Policy64 = agent::PolicyParameters<f64>;
/// Policy parameters in single precision, used for training runs.
pub type Policy32 = agent::PolicyParameters<f32>;
pub type Trainer32 = agent::Trainer<f32>;
pub type Checkpoint32 = agent::Checkpoint<f32>;
