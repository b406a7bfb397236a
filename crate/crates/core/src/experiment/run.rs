use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::agent::DdqnAgent;
use crate::env::{AnyEnv, Environment};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Mlp};
use crate::oracle::QueryFamily;
use crate::trainer::{run_training, EpisodeRow, Injector, LemmingProbe, RunMetrics, TrainingSetup};

/// Everything one seed produced, kept in memory.
pub struct SeedOutcome {
    pub run_id: String,
    pub seed: u64,
    pub metrics: RunMetrics,
    pub family: QueryFamily,
    /// `(episode, weights)` at the selected checkpoint episodes.
    pub checkpoints: Vec<(u64, Mlp)>,
    pub final_network: Mlp,
}

/// Episodes at which the quartile and periodic checkpoints fall.
pub fn checkpoint_episodes(config: &ExperimentConfig, episodes: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if episodes == 0 {
        return out;
    }
    if config.checkpoints.quartiles {
        for q in 1..=4u64 {
            out.push(((episodes * q + 3) / 4).max(1));
        }
    }
    if let Some(n) = config.checkpoints.every_episodes {
        out.extend((1..=episodes / n).map(|k| k * n));
    }
    out.push(episodes);
    out.sort_unstable();
    out.dedup();
    out
}

/// Reset stream seed, decoupled from the agent's stream.
fn reset_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03
}

/// Trains one seed. `oracle` false drops the query family (baseline).
pub fn run_seed(config: &ExperimentConfig, seed: u64, oracle: bool, base: &Path) -> Result<SeedOutcome> {
    config.validate()?;
    let mut env = config.env.build();
    let gamma = config.agent.gamma;
    let family = if oracle {
        config.family.resolve(&env, gamma, base)?
    } else {
        QueryFamily::empty()
    };
    let injector = Injector::from_policy(&config.injection, &family, env.as_gridworld(), gamma)?;
    let probe = env
        .as_gridworld()
        .map(|g| LemmingProbe::for_gridworld(g, gamma))
        .transpose()?;
    let mut agent = DdqnAgent::new(env.observation_dim(), env.n_actions(), config.agent.clone(), seed)?;
    let setup = TrainingSetup {
        family: &family,
        schedule: &config.schedule,
        injector: &injector,
        probe: probe.as_ref(),
        options: &config.training,
        seed: reset_seed(seed),
    };
    let mut snapshots: Vec<Mlp> = Vec::new();
    let mut hook = |_: &EpisodeRow, agent: &DdqnAgent| {
        snapshots.push(agent.online().clone());
        Ok(())
    };
    let metrics = run_training(&mut env as &mut AnyEnv, &mut agent, &setup, &mut hook)?;
    let wanted = checkpoint_episodes(config, metrics.episodes.len() as u64);
    let checkpoints = wanted
        .into_iter()
        .map(|e| (e, snapshots[e as usize - 1].clone()))
        .collect();
    Ok(SeedOutcome {
        run_id: config.run_id(seed),
        seed,
        metrics,
        family,
        checkpoints,
        final_network: agent.online().clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    pub episodes: u64,
    pub total_steps: u64,
    pub episodes_to_solve: Option<u64>,
    pub final_moving_avg: Option<f64>,
    pub lemmings: u64,
    pub injected: u64,
    pub sat_verdicts: u64,
    pub query_rounds: u64,
}

impl RunSummary {
    pub fn of(outcome: &SeedOutcome) -> Self {
        let m = &outcome.metrics;
        Self {
            run_id: outcome.run_id.clone(),
            seed: outcome.seed,
            episodes: m.episodes.len() as u64,
            total_steps: m.total_steps,
            episodes_to_solve: m.episodes_to_solve,
            final_moving_avg: m.final_moving_average(),
            lemmings: m.lemmings,
            injected: m.injected,
            sat_verdicts: m.sat_count(),
            query_rounds: m.query_rounds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub oracle: bool,
    pub runs: Vec<RunSummary>,
    /// Mean over the runs that solved; `None` if none did.
    pub mean_episodes_to_solve: Option<f64>,
    pub solved_runs: usize,
    pub mean_lemmings: f64,
}

impl ExperimentSummary {
    pub fn new(name: &str, oracle: bool, runs: Vec<RunSummary>) -> Self {
        let solved: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.episodes_to_solve.map(|e| e as f64))
            .collect();
        let mean_lemmings = if runs.is_empty() {
            0.0
        } else {
            runs.iter().map(|r| r.lemmings as f64).sum::<f64>() / runs.len() as f64
        };
        Self {
            name: name.to_string(),
            oracle,
            mean_episodes_to_solve: (!solved.is_empty())
                .then(|| solved.iter().sum::<f64>() / solved.len() as f64),
            solved_runs: solved.len(),
            mean_lemmings,
            runs,
        }
    }
}

/// Directory layout of an experiment's output.
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn metrics(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id).join("metrics.csv")
    }
    pub fn verdicts(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id).join("verdicts.jsonl")
    }
    pub fn checkpoint(&self, run_id: &str, episode: u64) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(run_id)
            .join(format!("ep{episode}.mlp"))
    }
    pub fn summary(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}.summary.json"))
    }
    pub fn family(&self) -> PathBuf {
        self.root.join("family.json")
    }
}

/// Trains every seed and writes metrics, verdict logs, checkpoints and a summary.
///
/// `base` resolves relative paths in the config.
pub fn run_experiment(config: &ExperimentConfig, oracle: bool, base: &Path) -> Result<ExperimentSummary> {
    config.validate()?;
    let paths = RunPaths {
        root: base.join(&config.output_dir),
    };
    std::fs::create_dir_all(&paths.root).map_err(|e| {
        Error::config("output_dir", format!("cannot create {}: {e}", paths.root.display()))
    })?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        log::info!("training {} (oracle: {oracle})", config.run_id(seed));
        let outcome = run_seed(config, seed, oracle, base)?;
        outcome.metrics.write_csv(&paths.metrics(&outcome.run_id))?;
        outcome
            .metrics
            .write_verdicts(&paths.verdicts(&outcome.run_id), &outcome.family)?;
        for (episode, net) in &outcome.checkpoints {
            checkpoint::save(net, &paths.checkpoint(&outcome.run_id, *episode))?;
        }
        if runs.is_empty() && !outcome.family.is_empty() {
            outcome.family.save(&paths.family())?;
        }
        let summary = RunSummary::of(&outcome);
        log::info!(
            "{}: {} episodes, solved at {:?}, lemmings {}, injected {}",
            summary.run_id,
            summary.episodes,
            summary.episodes_to_solve,
            summary.lemmings,
            summary.injected
        );
        runs.push(summary);
    }
    let summary = ExperimentSummary::new(&config.name, oracle, runs);
    std::fs::write(paths.summary(&config.name), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
