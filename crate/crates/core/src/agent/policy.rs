use std::hash::Hasher;

use fnv::FnvHasher;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activations, Mlp};
use super::AgentError;
use crate::gridworld::Action;
use crate::scalar::Scalar;

/// Separate actor and critic networks over the same features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
}

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const ACTOR_OUT_GAIN: f64 = 0.01;
const CRITIC_OUT_GAIN: f64 = 1.0;

impl<T: Scalar> PolicyParameters<T> {
    /// Two tanh hidden layers of width `hidden` per network.
    pub fn new<R: Rng + ?Sized>(n_features: usize, hidden: usize, rng: &mut R) -> Self {
        Self::with_layers(n_features, &[hidden, hidden], rng)
    }

    pub fn with_layers<R: Rng + ?Sized>(n_features: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![n_features];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let gains = |out_gain: f64| {
            let mut g = vec![HIDDEN_GAIN; hidden.len()];
            g.push(out_gain);
            g
        };
        Self {
            actor: Mlp::orthogonal(&sizes(Action::COUNT), &gains(ACTOR_OUT_GAIN), rng),
            critic: Mlp::orthogonal(&sizes(1), &gains(CRITIC_OUT_GAIN), rng),
        }
    }

    pub fn n_features(&self) -> usize {
        self.actor.sizes()[0]
    }

    pub fn n_params(&self) -> usize {
        self.actor.params().len() + self.critic.params().len()
    }

    pub fn is_finite(&self) -> bool {
        self.actor
            .params()
            .iter()
            .chain(self.critic.params())
            .all(|x| x.is_finite())
    }

    /// FNV hash of every parameter's bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FnvHasher::default();
        for x in self.actor.params().iter().chain(self.critic.params()) {
            h.write_u64(x.bits());
        }
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutput<T> {
    pub action: Action,
    pub log_prob: T,
    pub value: T,
}

/// Numerically stable log-softmax.
pub fn log_softmax<T: Scalar>(logits: &[T], out: &mut Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    out.clear();
    out.extend(logits.iter().map(|&z| z - lse));
}

/// Scratch buffers reused across calls to [`act`].
#[derive(Debug, Clone, Default)]
pub struct ActScratch<T> {
    actor: Activations<T>,
    critic: Activations<T>,
    logp: Vec<T>,
}

/// Samples (or picks greedily) an action from the actor's softmax.
pub fn act<T: Scalar, R: Rng + ?Sized>(
    params: &PolicyParameters<T>,
    features: &[T],
    mode: ActMode,
    rng: &mut R,
    scratch: &mut ActScratch<T>,
) -> Result<ActOutput<T>, AgentError> {
    params.actor.forward(features, &mut scratch.actor);
    params.critic.forward(features, &mut scratch.critic);
    let logits = scratch.actor.output();
    let value = scratch.critic.output()[0];
    if !logits.iter().all(|z| z.is_finite()) || !value.is_finite() {
        return Err(AgentError::NonFiniteParameters);
    }
    log_softmax(logits, &mut scratch.logp);
    let idx = match mode {
        ActMode::Greedy => {
            let mut best = 0;
            for (i, &l) in scratch.logp.iter().enumerate() {
                if l > scratch.logp[best] {
                    best = i;
                }
            }
            best
        }
        ActMode::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = scratch.logp.len() - 1;
            for (i, &l) in scratch.logp.iter().enumerate() {
                acc += l.exp().to_f64_lossy();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    Ok(ActOutput {
        action: Action::from_index(idx).expect("actor has one logit per action"),
        log_prob: scratch.logp[idx],
        value,
    })
}

/// Critic estimate for one feature vector.
pub fn state_value<T: Scalar>(params: &PolicyParameters<T>, features: &[T], scratch: &mut ActScratch<T>) -> T {
    params.critic.forward(features, &mut scratch.critic);
    scratch.critic.output()[0]
}

/// Action probabilities for one feature vector.
pub fn action_probabilities<T: Scalar>(params: &PolicyParameters<T>, features: &[T]) -> Vec<T> {
    let mut cache = Activations::default();
    params.actor.forward(features, &mut cache);
    let mut logp = Vec::new();
    log_softmax(cache.output(), &mut logp);
    logp.into_iter().map(|l| l.exp()).collect()
}
