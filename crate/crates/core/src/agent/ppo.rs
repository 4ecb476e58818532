//! Clipped-ratio policy gradient with GAE, Adam and gradient-norm capping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Activations;
use super::policy::{log_softmax, PolicyParameters};
use super::AgentError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub rollout_len: usize,
    pub hidden: usize,
    pub adam_eps: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch: 256,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            rollout_len: 2048,
            hidden: 128,
            adam_eps: 1e-5,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if self.clip <= 0.0 {
            return bad("clip must be positive");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.rollout_len == 0 || self.hidden == 0 {
            return bad("epochs, minibatch, rollout_len and hidden must be positive");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0 {
            return bad("learning_rate and max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// One rollout of fixed capacity, consumed by a single update.
#[derive(Debug, Clone)]
pub struct RolloutBuffer<T> {
    n_features: usize,
    capacity: usize,
    pub features: Vec<T>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    pub dones: Vec<bool>,
    pub goal_ids: Vec<usize>,
}

impl<T: Scalar> RolloutBuffer<T> {
    pub fn new(n_features: usize, capacity: usize) -> Self {
        Self {
            n_features,
            capacity,
            features: Vec::with_capacity(n_features * capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            goal_ids: Vec::with_capacity(capacity),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, features: &[T], action: usize, log_prob: T, reward: T, value: T, done: bool, goal_id: usize) {
        assert!(!self.is_full(), "rollout buffer overflow");
        assert_eq!(features.len(), self.n_features);
        self.features.extend_from_slice(features);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        self.goal_ids.push(goal_id);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn clear(&mut self) {
        self.features.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.goal_ids.clear();
    }
}

/// Generalized advantage estimation. `dones[t]` marks that the episode ended
/// after step `t`; `bootstrap` is the value of the state after the last step.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap: T,
    gamma: T,
    lambda: T,
) -> Result<(Vec<T>, Vec<T>), AgentError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(AgentError::LengthMismatch);
    }
    let mut adv = vec![T::zero(); n];
    let mut next_adv = T::zero();
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}

/// Samples fed to the loss, with features flattened row-major.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, T> {
    pub n_features: usize,
    pub features: &'a [T],
    pub actions: &'a [usize],
    pub old_log_probs: &'a [T],
    pub advantages: &'a [T],
    pub returns: &'a [T],
}

impl<T> Batch<'_, T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Loss terms averaged over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub total: T,
    pub policy: T,
    pub value: T,
    pub entropy: T,
    pub clip_fraction: T,
}

/// Coefficients of the combined loss.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights<T> {
    pub clip: T,
    pub entropy: T,
    pub value: T,
}

impl<T: Scalar> LossWeights<T> {
    pub fn from_config(c: &TrainerConfig) -> Self {
        Self {
            clip: T::of(c.clip),
            entropy: T::of(c.entropy_coef),
            value: T::of(c.value_coef),
        }
    }
}

/// Gradient buffers shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub actor: Vec<T>,
    pub critic: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(p: &PolicyParameters<T>) -> Self {
        Self {
            actor: vec![T::zero(); p.actor.params().len()],
            critic: vec![T::zero(); p.critic.params().len()],
        }
    }

    pub fn clear(&mut self) {
        self.actor.iter_mut().for_each(|g| *g = T::zero());
        self.critic.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn norm(&self) -> T {
        self.actor
            .iter()
            .chain(&self.critic)
            .map(|&g| g * g)
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&mut self, s: T) {
        self.actor.iter_mut().chain(self.critic.iter_mut()).for_each(|g| *g *= s);
    }

    pub fn flat(&self) -> Vec<T> {
        self.actor.iter().chain(&self.critic).copied().collect()
    }
}

/// Combined loss: clipped surrogate + value regression - entropy bonus.
pub fn surrogate_loss<T: Scalar>(params: &PolicyParameters<T>, batch: &Batch<T>, w: &LossWeights<T>) -> LossTerms<T> {
    loss_and_grad(params, batch, w, None)
}

/// Same as [`surrogate_loss`], also accumulating the analytic gradient into `grad`.
pub fn surrogate_grad<T: Scalar>(
    params: &PolicyParameters<T>,
    batch: &Batch<T>,
    w: &LossWeights<T>,
    grad: &mut Gradients<T>,
) -> LossTerms<T> {
    loss_and_grad(params, batch, w, Some(grad))
}

fn loss_and_grad<T: Scalar>(
    params: &PolicyParameters<T>,
    batch: &Batch<T>,
    w: &LossWeights<T>,
    mut grad: Option<&mut Gradients<T>>,
) -> LossTerms<T> {
    let n = batch.len();
    let inv_n = T::one() / T::of(n as f64);
    let half = T::of(0.5);
    let (lo, hi) = (T::one() - w.clip, T::one() + w.clip);
    let mut actor_cache = Activations::default();
    let mut critic_cache = Activations::default();
    let mut logp = Vec::new();
    let mut d_logits = Vec::new();
    let mut terms = LossTerms::<T>::default();
    for i in 0..n {
        let x = &batch.features[i * batch.n_features..(i + 1) * batch.n_features];
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        params.actor.forward(x, &mut actor_cache);
        params.critic.forward(x, &mut critic_cache);
        log_softmax(actor_cache.output(), &mut logp);
        let ratio = (logp[a] - batch.old_log_probs[i]).exp();
        let clipped = ratio.max(lo).min(hi);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        let unclipped_active = unclipped_term <= clipped_term;
        let pg = -unclipped_term.min(clipped_term);
        let entropy: T = -logp.iter().map(|&l| l.exp() * l).sum::<T>();
        let v = critic_cache.output()[0];
        let v_err = v - batch.returns[i];
        let v_loss = half * v_err * v_err;

        terms.policy += pg * inv_n;
        terms.value += v_loss * inv_n;
        terms.entropy += entropy * inv_n;
        if (ratio - T::one()).abs() > w.clip {
            terms.clip_fraction += inv_n;
        }

        if let Some(g) = grad.as_deref_mut() {
            // d pg / d logp[a]
            let g_logp = if unclipped_active { -adv * ratio } else { T::zero() };
            d_logits.clear();
            for (k, &l) in logp.iter().enumerate() {
                let p = l.exp();
                let onehot = if k == a { T::one() } else { T::zero() };
                let d_pg = g_logp * (onehot - p);
                // d entropy / d logit_k = -p_k (log p_k + H)
                let d_ent = -p * (l + entropy);
                d_logits.push((d_pg - w.entropy * d_ent) * inv_n);
            }
            params.actor.backward(&actor_cache, &d_logits, &mut g.actor);
            params.critic.backward(&critic_cache, &[w.value * v_err * inv_n], &mut g.critic);
        }
    }
    terms.total = terms.policy + w.value * terms.value - w.entropy * terms.entropy;
    terms
}

/// Adam optimizer state for both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub step: u64,
    pub m_actor: Vec<T>,
    pub v_actor: Vec<T>,
    pub m_critic: Vec<T>,
    pub v_critic: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(p: &PolicyParameters<T>) -> Self {
        let (na, nc) = (p.actor.params().len(), p.critic.params().len());
        Self {
            step: 0,
            m_actor: vec![T::zero(); na],
            v_actor: vec![T::zero(); na],
            m_critic: vec![T::zero(); nc],
            v_critic: vec![T::zero(); nc],
        }
    }

    pub fn apply(&mut self, p: &mut PolicyParameters<T>, g: &Gradients<T>, lr: f64, eps: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.step += 1;
        let t = self.step as i32;
        let step_size = T::of(lr * (1.0 - B2.powi(t)).sqrt() / (1.0 - B1.powi(t)));
        let (b1, b2, eps) = (T::of(B1), T::of(B2), T::of(eps));
        let update = |params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T]| {
            for (((x, &gi), mi), vi) in params.iter_mut().zip(grads).zip(m).zip(v) {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                *x -= step_size * *mi / (vi.sqrt() + eps);
            }
        };
        update(p.actor.params_mut(), &g.actor, &mut self.m_actor, &mut self.v_actor);
        update(p.critic.params_mut(), &g.critic, &mut self.m_critic, &mut self.v_critic);
    }
}

/// Averages of the loss terms over all minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Optimizer plus the minibatch shuffling stream.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub config: TrainerConfig,
    pub adam: Adam<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainerConfig, params: &PolicyParameters<T>, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self {
            config,
            adam: Adam::new(params),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Runs the configured epochs over `buffer` and returns the new parameters.
    /// On a non-finite loss the update is abandoned and nothing changes.
    pub fn update(
        &mut self,
        params: &PolicyParameters<T>,
        buffer: &RolloutBuffer<T>,
        bootstrap: T,
    ) -> Result<(PolicyParameters<T>, UpdateMetrics), AgentError> {
        let c = &self.config;
        let (mut adv, returns) = compute_gae(
            &buffer.rewards,
            &buffer.values,
            &buffer.dones,
            bootstrap,
            T::of(c.gamma),
            T::of(c.gae_lambda),
        )?;
        normalize(&mut adv);
        let n = buffer.len();
        let nf = buffer.n_features();
        let weights = LossWeights::from_config(c);
        let mut next = params.clone();
        let mut adam = self.adam.clone();
        let mut rng = self.rng.clone();
        let mut grad = Gradients::zeros_like(params);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut metrics = UpdateMetrics::default();
        let mut batches = 0usize;
        let (mut f, mut a, mut lp, mut ad, mut ret) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..c.epochs {
            idx.shuffle(&mut rng);
            for chunk in idx.chunks(c.minibatch) {
                f.clear();
                a.clear();
                lp.clear();
                ad.clear();
                ret.clear();
                for &i in chunk {
                    f.extend_from_slice(&buffer.features[i * nf..(i + 1) * nf]);
                    a.push(buffer.actions[i]);
                    lp.push(buffer.log_probs[i]);
                    ad.push(adv[i]);
                    ret.push(returns[i]);
                }
                let batch = Batch {
                    n_features: nf,
                    features: &f,
                    actions: &a,
                    old_log_probs: &lp,
                    advantages: &ad,
                    returns: &ret,
                };
                grad.clear();
                let terms = surrogate_grad(&next, &batch, &weights, &mut grad);
                if !terms.total.is_finite() {
                    return Err(AgentError::NonFiniteLoss);
                }
                let norm = grad.norm();
                let cap = T::of(c.max_grad_norm);
                if norm > cap {
                    grad.scale(cap / (norm + T::of(1e-12)));
                }
                adam.apply(&mut next, &grad, c.learning_rate, c.adam_eps);
                metrics.policy_loss += terms.policy.to_f64_lossy();
                metrics.value_loss += terms.value.to_f64_lossy();
                metrics.entropy += terms.entropy.to_f64_lossy();
                metrics.clip_fraction += terms.clip_fraction.to_f64_lossy();
                metrics.grad_norm += norm.to_f64_lossy();
                batches += 1;
            }
        }
        if !next.is_finite() {
            return Err(AgentError::NonFiniteLoss);
        }
        let k = batches.max(1) as f64;
        metrics.policy_loss /= k;
        metrics.value_loss /= k;
        metrics.entropy /= k;
        metrics.clip_fraction /= k;
        metrics.grad_norm /= k;
        self.adam = adam;
        self.rng = rng;
        Ok((next, metrics))
    }
}

/// Shifts to mean 0 and scales to unit (population) standard deviation.
pub fn normalize<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let n = T::of(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt() + T::of(1e-8);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}
