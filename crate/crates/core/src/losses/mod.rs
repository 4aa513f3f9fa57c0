//! Training objectives: discrimination, the three contrastive losses, the
//! TD and actor losses, and the discriminator-derived reward.

pub mod contrastive;
pub mod oracle;

pub use contrastive::{c_sup_con_loss, sup_con_loss, unsup_con_loss, Calibrated, LossGrad};
pub use oracle::{label_batch, oracle_contrastive, LabeledView, OracleLosses, ViewKind};

use crate::error::{Error, Result};
use crate::nn::Scalar;

pub const REWARD_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastConfig {
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            lambda1: 1.0,
            lambda2: 1.0,
            alpha: 0.3,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

pub fn cosine_sim(u: &[f64], w: &[f64]) -> Result<f64> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nw == 0.0 {
        return Err(Error::DegenerateInput("cosine similarity of a zero vector".into()));
    }
    Ok(u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / (nu * nw))
}

/// `−log(exp(sim(a, p)/τ) / Σ_{j∈C} exp(sim(a, j)/τ))`
pub fn info_nce(anchor: &[f64], positive: &[f64], contrast: &[&[f64]], tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if contrast.is_empty() {
        return Err(Error::BatchTooSmall("empty contrast set".into()));
    }
    let logits = contrast
        .iter()
        .map(|c| cosine_sim(anchor, c).map(|s| s / tau))
        .collect::<Result<Vec<_>>>()?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(lse - cosine_sim(anchor, positive)? / tau)
}

/// InfoNCE averaged over every positive.
pub fn sup_single(anchor: &[f64], positives: &[&[f64]], contrast: &[&[f64]], tau: f64) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::BatchTooSmall("empty positive set".into()));
    }
    let mut total = 0.0;
    for p in positives {
        total += info_nce(anchor, p, contrast, tau)?;
    }
    Ok(total / positives.len() as f64)
}

/// `(1/N) Σ [−log p_e − log(1 − p_a)]` with gradients w.r.t. both inputs.
pub fn dis_loss<T: Scalar>(expert_probs: &[T], agent_probs: &[T]) -> (T, Vec<T>, Vec<T>) {
    assert_eq!(expert_probs.len(), agent_probs.len(), "dis_loss: batch sizes");
    let n = T::from_f64(expert_probs.len() as f64);
    let mut total = T::zero();
    let mut d_e = Vec::with_capacity(expert_probs.len());
    let mut d_a = Vec::with_capacity(agent_probs.len());
    for (&pe, &pa) in expert_probs.iter().zip(agent_probs) {
        total += -pe.ln() - (T::one() - pa).ln();
        d_e.push(-T::one() / (pe * n));
        d_a.push(T::one() / ((T::one() - pa) * n));
    }
    (total / n, d_e, d_a)
}

/// `−log(1 − p)` clipped to `[0, 10]`.
pub fn disc_reward(p: f64) -> f64 {
    (-(1.0 - p).ln()).clamp(0.0, REWARD_CLIP)
}

/// `r + γ(1 − d)·min(q̄1, q̄2)`
pub fn td_target(reward: f64, gamma: f64, done: bool, target_q1: f64, target_q2: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * target_q1.min(target_q2)
    }
}

/// Mean squared TD error over the batch and both critics, with gradients
/// w.r.t. each critic's outputs.
pub fn td_loss<T: Scalar>(q1: &[T], q2: &[T], y: &[T]) -> (T, Vec<T>, Vec<T>) {
    let b = T::from_f64(y.len() as f64);
    let two = T::from_f64(2.0);
    let mut total = T::zero();
    let grad = |q: &[T]| q.iter().zip(y).map(|(&qi, &yi)| (qi - yi) / b).collect::<Vec<T>>();
    for ((&a, &c), &t) in q1.iter().zip(q2).zip(y) {
        total += (a - t) * (a - t) + (c - t) * (c - t);
    }
    (total / (two * b), grad(q1), grad(q2))
}

/// `−mean min(q1, q2)`; the gradient goes to the smaller critic (the first
/// on ties).
pub fn actor_loss<T: Scalar>(q1: &[T], q2: &[T]) -> (T, Vec<T>, Vec<T>) {
    let b = T::from_f64(q1.len() as f64);
    let g = -T::one() / b;
    let mut total = T::zero();
    let mut d1 = vec![T::zero(); q1.len()];
    let mut d2 = vec![T::zero(); q2.len()];
    for i in 0..q1.len() {
        if q1[i] <= q2[i] {
            total += q1[i];
            d1[i] = g;
        } else {
            total += q2[i];
            d2[i] = g;
        }
    }
    (-total / b, d1, d2)
}

/// Logged parts of the discriminator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub dis: f64,
    pub unsup: f64,
    pub csup: f64,
}

impl Components {
    /// `L_dis + λ1·L_unsup + λ2·L_csup`. A term with zero weight is
    /// dropped entirely, so an uncomputed (NaN) component cannot leak in.
    pub fn total(&self, lambda1: f64, lambda2: f64) -> f64 {
        let mut total = self.dis;
        if lambda1 != 0.0 {
            total += lambda1 * self.unsup;
        }
        if lambda2 != 0.0 {
            total += lambda2 * self.csup;
        }
        total
    }
}
