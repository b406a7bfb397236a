use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::{AnyEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::oracle::{build_lander_query_family, Budget, LanderGrid, QueryFamily};
use crate::trainer::{InjectionPolicy, Schedule, TrainingOptions};

pub const CONFIG_VERSION: u32 = 1;

/// Where the training-time query family comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FamilySource {
    /// No oracle; plain DDQN.
    None,
    /// One exhaustive query per hazard-entering pair of a gridworld.
    Gridworld,
    /// JSON family file, relative to the config file.
    File { path: PathBuf },
    Lander {
        #[serde(default)]
        grid: LanderGrid,
    },
}

impl FamilySource {
    pub fn resolve(&self, env: &AnyEnv, gamma: f64, base: &Path) -> Result<QueryFamily> {
        match self {
            FamilySource::None => Ok(QueryFamily::empty()),
            FamilySource::Gridworld => {
                let g = env
                    .as_gridworld()
                    .ok_or_else(|| Error::config("family.source", "gridworld family needs a gridworld"))?;
                QueryFamily::for_gridworld(g, gamma)
            }
            FamilySource::File { path } => QueryFamily::load(&base.join(path)),
            FamilySource::Lander { grid } => build_lander_query_family(grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointPolicy {
    /// Save at the quartiles of the finished run (by episode).
    pub quartiles: bool,
    /// Additionally save every n episodes.
    pub every_episodes: Option<u64>,
}

impl Default for CheckpointPolicy {
    fn default() -> Self {
        Self {
            quartiles: true,
            every_episodes: None,
        }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_family() -> FamilySource {
    FamilySource::None
}

fn default_eval_budget() -> Budget {
    Budget {
        max_boxes: 1_000_000,
        time_secs: Some(10.0),
    }
}

/// One experiment: an environment, learner settings, oracle settings and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "default_family")]
    pub family: FamilySource,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub injection: InjectionPolicy,
    #[serde(default)]
    pub training: TrainingOptions,
    #[serde(default)]
    pub checkpoints: CheckpointPolicy,
    #[serde(default = "default_eval_budget")]
    pub evaluation_budget: Budget,
}

impl ExperimentConfig {
    pub fn new(name: &str, env: EnvConfig, seeds: Vec<u64>) -> Self {
        Self {
            version: CONFIG_VERSION,
            name: name.to_string(),
            seeds,
            output_dir: default_output(),
            env,
            agent: AgentConfig::default(),
            family: FamilySource::None,
            schedule: Schedule::default(),
            injection: InjectionPolicy::default(),
            training: TrainingOptions::default(),
            checkpoints: CheckpointPolicy::default(),
            evaluation_budget: default_eval_budget(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config("toml", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("toml", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.training.max_steps == 0 {
            return Err(Error::config("training.max_steps", "must be positive"));
        }
        if self.checkpoints.every_episodes == Some(0) {
            return Err(Error::config("checkpoints.every_episodes", "must be positive"));
        }
        if self.evaluation_budget.max_boxes == 0 {
            return Err(Error::config("evaluation_budget.max_boxes", "must be positive"));
        }
        self.agent.validate()?;
        self.schedule.validate()?;
        Ok(())
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-s{seed}", self.name)
    }
}
