//! FIFO experience replay. Observations are shared `Arc`s, so a transition
//! costs two pointers rather than two image copies.

use crate::environment::Observation;
use rand::Rng;
use std::collections::VecDeque;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Experience {
    pub obs: Arc<Observation>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Arc<Observation>,
    pub done: bool,
}

#[derive(Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    /// Append, evicting the oldest entry once full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
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

    pub fn get(&self, index: usize) -> &Experience {
        &self.items[index]
    }

    /// Uniform sample of `k` indices, with replacement.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R, k: usize) -> Vec<usize> {
        assert!(!self.items.is_empty(), "cannot sample from an empty buffer");
        (0..k).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}
