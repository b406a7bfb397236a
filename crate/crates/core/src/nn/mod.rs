//! Dense tanh MLPs with exact gradients, Adam, and interval propagation.

mod adam;
pub mod checkpoint;
mod interval;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use interval::Interval;
pub use mlp::{argmax, Gradients, LayerView, Mlp};
