use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::SacError;
use crate::env::STATE_DIM;

/// One environment transition. `action` is the agent's output before the
/// environment's rate limiting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmdpTransition {
    pub state: [f64; STATE_DIM],
    pub action: f64,
    pub reward: f64,
    pub cost: f64,
    pub next_state: [f64; STATE_DIM],
    /// Terminal (collision); trace ends are not terminal.
    pub done: bool,
}

/// FIFO ring buffer with uniform sampling without replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<CmdpTransition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: CmdpTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest-first view of the stored transitions.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &CmdpTransition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CmdpTransition>, SacError> {
        if self.items.len() < batch {
            return Err(SacError::BufferTooSmall {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| self.items[i])
            .collect())
    }
}
