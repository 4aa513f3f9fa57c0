use rand::Rng;

use super::augment::{augment, AugMode};
use crate::env::VisualState;
use crate::error::{Error, Result};

/// Augmented views for one discriminator step: two per agent state (siblings
/// at indices 2i and 2i+1) and one per expert state, in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBatch {
    pub agent_views: Vec<VisualState>,
    pub expert_views: Vec<VisualState>,
}

impl ViewBatch {
    /// Number of source states N.
    pub fn sources(&self) -> usize {
        self.expert_views.len()
    }

    /// Index of the sibling view of agent view `i`.
    pub fn pair(i: usize) -> usize {
        i ^ 1
    }

    /// The pairing map over all 2N agent views.
    pub fn pairing(&self) -> Vec<usize> {
        (0..self.agent_views.len()).map(Self::pair).collect()
    }

    /// First view of every agent source, in order.
    pub fn primary_agent_views(&self) -> impl Iterator<Item = &VisualState> {
        self.agent_views.iter().step_by(2)
    }
}

pub fn make_views<R: Rng + ?Sized>(
    agent_states: &[&VisualState],
    expert_states: &[&VisualState],
    mode: AugMode,
    rng: &mut R,
) -> Result<ViewBatch> {
    let n = agent_states.len();
    if n != expert_states.len() {
        return Err(Error::Config(format!(
            "agent/expert batch sizes differ: {n} vs {}",
            expert_states.len()
        )));
    }
    if n < 2 {
        return Err(Error::BatchTooSmall(format!(
            "need at least 2 states per side, got {n}"
        )));
    }
    let mut agent_views = Vec::with_capacity(2 * n);
    for s in agent_states {
        agent_views.push(augment(s, mode, rng));
        agent_views.push(augment(s, mode, rng));
    }
    let expert_views = expert_states.iter().map(|s| augment(s, mode, rng)).collect();
    Ok(ViewBatch {
        agent_views,
        expert_views,
    })
}
