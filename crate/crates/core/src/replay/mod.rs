//! Proportional prioritized experience replay.

mod buffer;
mod sum_tree;

pub use buffer::{Origin, PerConfig, PrioritizedBuffer, SampleIndex, SampledBatch, Transition};
pub use sum_tree::SumTree;
