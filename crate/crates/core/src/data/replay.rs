use std::collections::VecDeque;

use rand::Rng;

use crate::env::{Action, VisualState};
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 100_000;

/// One environment step. `reward` is whatever was stored; learners relabel it
/// with the current discriminator at update time.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub v: VisualState,
    pub action: Action,
    pub reward: f64,
    pub v_next: VisualState,
    pub done: bool,
}

impl Transition {
    pub fn done_flag(&self) -> f64 {
        if self.done {
            1.0
        } else {
            0.0
        }
    }
}

/// FIFO ring of transitions with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    shape: (usize, usize, usize),
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    /// `shape` is (frames, height, width) of every stored visual state.
    pub fn new(capacity: usize, shape: (usize, usize, usize)) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            shape,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        for (which, s) in [("v", &t.v), ("v'", &t.v_next)] {
            if s.shape() != self.shape {
                return Err(Error::Storage(format!(
                    "{which} has shape {:?}, buffer expects {:?}",
                    s.shape(),
                    self.shape
                )));
            }
        }
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..len)]).collect())
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
