//! Fixed-capacity ring replay buffer with uniform sampling.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Debug)]
pub struct StoredTransition {
    pub state: Vec<f64>,
    /// Continuous pre-threshold action in (−1, 1)^n.
    pub action: Vec<f64>,
    pub reward: f64,
    pub constraint_c: u8,
    pub next_state: Vec<f64>,
    pub done: bool,
}

pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<StoredTransition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity.min(4096)), cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: StoredTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> &StoredTransition {
        &self.items[idx]
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, rng: &mut ChaCha12Rng, batch: usize) -> Vec<usize> {
        assert!(!self.items.is_empty());
        (0..batch).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}
