//! Training environments: two gridworlds and a simplified 2D lander.

mod absent_supervisor;
mod cliff_walk;
mod lander;

use serde::{Deserialize, Serialize};

pub use absent_supervisor::{AbsentSupervisor, SupervisorCell};
pub use cliff_walk::CliffWalk;
pub use lander::{LanderAction, LanderLite, LanderParams};

use crate::error::{Error, Result};
use crate::mdp::{BadSet, TabularMdp};

/// Gridworld move set shared by both gridworlds.
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The episode ended by the task's own rules.
    pub terminal: bool,
    /// The episode hit its step cap; the last state is not absorbing.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode; all randomness of the episode is derived from `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepResult>;
    /// 100-episode moving-average reward that counts as solved.
    fn solve_threshold(&self) -> f64;
}

/// Finite-state environments with an exact tabular model.
pub trait Gridworld: Environment {
    /// Number of tabular states, not counting the dummy.
    fn n_states(&self) -> usize;
    fn encode(&self, state: usize) -> Vec<f64>;
    fn decode(&self, observation: &[f64]) -> Option<usize>;
    /// Exact model plus the bad set (pairs entering a hazard).
    fn to_tabular(&self, gamma: f64) -> Result<(TabularMdp, BadSet)>;

    /// Bad pairs as `(observation, action)`.
    fn unsafe_pairs(&self, gamma: f64) -> Result<Vec<(Vec<f64>, usize)>> {
        let (_, bad) = self.to_tabular(gamma)?;
        Ok(bad
            .pairs
            .iter()
            .map(|&(s, a)| (self.encode(s), a))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    CliffWalk,
    AbsentSupervisor,
    LanderLite {
        #[serde(default)]
        params: LanderParams,
    },
}

impl EnvConfig {
    pub fn build(&self) -> AnyEnv {
        match self {
            EnvConfig::CliffWalk => AnyEnv::CliffWalk(CliffWalk::new()),
            EnvConfig::AbsentSupervisor => AnyEnv::AbsentSupervisor(AbsentSupervisor::new()),
            EnvConfig::LanderLite { params } => AnyEnv::LanderLite(LanderLite::new(params.clone())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::CliffWalk => "cliff_walk",
            EnvConfig::AbsentSupervisor => "absent_supervisor",
            EnvConfig::LanderLite { .. } => "lander_lite",
        }
    }
}

/// Runtime-selected environment.
pub enum AnyEnv {
    CliffWalk(CliffWalk),
    AbsentSupervisor(AbsentSupervisor),
    LanderLite(LanderLite),
}

macro_rules! dispatch {
    ($self:ident, $env:ident => $body:expr) => {
        match $self {
            AnyEnv::CliffWalk($env) => $body,
            AnyEnv::AbsentSupervisor($env) => $body,
            AnyEnv::LanderLite($env) => $body,
        }
    };
}

impl AnyEnv {
    pub fn as_gridworld(&self) -> Option<&dyn Gridworld> {
        match self {
            AnyEnv::CliffWalk(e) => Some(e),
            AnyEnv::AbsentSupervisor(e) => Some(e),
            AnyEnv::LanderLite(_) => None,
        }
    }

    pub fn to_tabular(&self, gamma: f64) -> Result<(TabularMdp, BadSet)> {
        self.as_gridworld()
            .ok_or_else(|| Error::Unsupported("lander_lite has no tabular model".into()))?
            .to_tabular(gamma)
    }
}

impl Environment for AnyEnv {
    fn observation_dim(&self) -> usize {
        dispatch!(self, e => e.observation_dim())
    }
    fn n_actions(&self) -> usize {
        dispatch!(self, e => e.n_actions())
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        dispatch!(self, e => e.reset(seed))
    }
    fn step(&mut self, action: usize) -> Result<StepResult> {
        dispatch!(self, e => e.step(action))
    }
    fn solve_threshold(&self) -> f64 {
        dispatch!(self, e => e.solve_threshold())
    }
}

pub(crate) fn check_action(action: usize, n: usize) -> Result<()> {
    if action >= n {
        return Err(Error::invalid(format!("action {action} out of range (n = {n})")));
    }
    Ok(())
}

pub(crate) fn one_hot(len: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[hot] = 1.0;
    v
}
