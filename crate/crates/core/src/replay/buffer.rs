use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sum_tree::SumTree;
use crate::error::{Error, Result};

/// Where a transition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Environment,
    Oracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub origin: Origin,
}

impl Transition {
    /// Synthesized terminal experience: `next_state` is a zero placeholder
    /// that the TD target never reads.
    pub fn injected(state: Vec<f64>, action: usize, reward: f64) -> Self {
        let next_state = vec![0.0; state.len()];
        Self {
            state,
            action,
            reward,
            next_state,
            terminal: true,
            origin: Origin::Oracle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerConfig {
    pub capacity: usize,
    /// Prioritization exponent.
    pub alpha: f64,
    /// Importance-sampling exponent.
    pub beta: f64,
    /// Priority floor added to |TD error|.
    pub epsilon: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            capacity: 100_000,
            alpha: 0.6,
            beta: 0.6,
            epsilon: 1e-3,
        }
    }
}

/// Handle to a sampled slot. `id` detects slots overwritten since sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleIndex {
    pub slot: usize,
    pub id: u64,
}

pub struct SampledBatch<'a> {
    pub transitions: Vec<&'a Transition>,
    pub indices: Vec<SampleIndex>,
    pub weights: Vec<f64>,
}

struct Slot {
    transition: Transition,
    id: u64,
}

/// Proportional prioritized replay over a FIFO ring.
pub struct PrioritizedBuffer {
    config: PerConfig,
    slots: Vec<Slot>,
    next: usize,
    inserted: u64,
    tree: SumTree,
    max_priority: f64,
    stale_updates: u64,
}

impl PrioritizedBuffer {
    pub fn new(config: PerConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        if !(config.alpha >= 0.0 && config.beta >= 0.0 && config.epsilon > 0.0) {
            return Err(Error::invalid("PER exponents must be >= 0 and epsilon > 0"));
        }
        Ok(Self {
            config,
            slots: Vec::with_capacity(config.capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
            tree: SumTree::new(config.capacity),
            max_priority: 1.0,
            stale_updates: 0,
        })
    }

    pub fn config(&self) -> &PerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn total_priority(&self) -> f64 {
        self.tree.total()
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    pub fn stale_updates(&self) -> u64 {
        self.stale_updates
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn transition(&self, slot: usize) -> Option<&Transition> {
        self.slots.get(slot).map(|s| &s.transition)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.slots.iter().map(|s| &s.transition)
    }

    /// `(|td_error| + epsilon)^alpha`.
    pub fn priority_for(&self, td_error: f64) -> f64 {
        (td_error.abs() + self.config.epsilon).powf(self.config.alpha)
    }

    /// Inserts at the current maximum priority, evicting the oldest entry when full.
    pub fn push(&mut self, transition: Transition) -> SampleIndex {
        let id = self.inserted;
        self.inserted += 1;
        let slot = self.next;
        let entry = Slot { transition, id };
        if slot == self.slots.len() {
            self.slots.push(entry);
        } else {
            self.slots[slot] = entry;
        }
        self.tree.set(slot, self.max_priority);
        self.next = (self.next + 1) % self.config.capacity;
        SampleIndex { slot, id }
    }

    /// Stratified proportional sample with importance weights normalized by
    /// the batch maximum. Draws with replacement, so `batch` may exceed `len`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<SampledBatch<'_>> {
        if self.is_empty() {
            return Err(Error::invalid("cannot sample from an empty buffer"));
        }
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let n = self.len() as f64;
        let mut transitions = Vec::with_capacity(batch);
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for i in 0..batch {
            let u: f64 = rng.gen();
            let mass = ((i as f64 + u) * segment).min(total * (1.0 - f64::EPSILON));
            let slot = self.tree.find(mass).min(self.len() - 1);
            let prob = self.tree.get(slot) / total;
            weights.push((n * prob).powf(-beta));
            let s = &self.slots[slot];
            transitions.push(&s.transition);
            indices.push(SampleIndex { slot, id: s.id });
        }
        let max_w = weights.iter().cloned().fold(0.0, f64::max);
        weights.iter_mut().for_each(|w| *w /= max_w);
        Ok(SampledBatch {
            transitions,
            indices,
            weights,
        })
    }

    /// Sets priorities from fresh TD errors. Indices whose slot has been
    /// overwritten since sampling are skipped and counted.
    pub fn update_priorities(&mut self, indices: &[SampleIndex], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                actual: td_errors.len(),
            });
        }
        for (idx, &err) in indices.iter().zip(td_errors) {
            if !err.is_finite() {
                return Err(Error::invalid("non-finite TD error"));
            }
            match self.slots.get(idx.slot) {
                Some(s) if s.id == idx.id => {
                    let p = self.priority_for(err);
                    self.tree.set(idx.slot, p);
                    self.max_priority = self.max_priority.max(p);
                }
                _ => self.stale_updates += 1,
            }
        }
        Ok(())
    }
}
