//! Introspection learning for off-policy deep RL.
//!
//! During DDQN training, an interval branch-and-bound oracle asks the current
//! Q-network for states in which it would pick a designated bad action; those
//! states are pushed into the replay buffer as terminal, penalized experience.
//! The [`mdp`] module checks, on finite MDPs, that this kind of terminal
//! penalty leaves the set of optimal policies unchanged when every optimal
//! policy already avoids the bad pairs.

pub mod agent;
pub mod env;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod trainer;

pub use error::{Error, Result};
