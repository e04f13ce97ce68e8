use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One environment step seen by an agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Vec<f64>,
    /// Always `−1.0` or `+1.0`.
    pub reward: f64,
}

/// Fixed-capacity FIFO replay memory.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `min(batch, len)` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let n = batch.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// An observed `(state, action)` pair and the binary reward it earned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnRecord {
    pub state: Vec<f64>,
    pub action: usize,
    /// Always `−1.0` or `+1.0`.
    pub value: f64,
}

/// Fixed-capacity FIFO experience set for nearest-neighbor value estimates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NnMemory {
    capacity: usize,
    records: VecDeque<NnRecord>,
}

impl NnMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            records: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: NnRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn records(&self) -> impl Iterator<Item = &NnRecord> {
        self.records.iter()
    }
}

/// `1 − cos(a, b)`; `1` when either vector has zero norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

/// `min_i q_i + l_corr · d(s, s_i)` over records sharing `action`, or `None`
/// when no such record exists.
pub fn nn_estimate(mem: &NnMemory, state: &[f64], action: usize, l_corr: f64) -> Option<f64> {
    mem.records()
        .filter(|r| r.action == action)
        .map(|r| r.value + l_corr * cosine_distance(state, &r.state))
        .reduce(f64::min)
}
