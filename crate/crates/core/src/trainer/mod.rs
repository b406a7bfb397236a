//! Training loop that interleaves DDQN updates with oracle queries and
//! injects every returned witness into replay as a penalized terminal example.

mod injection;
mod schedule;

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use injection::{count_lemmings, InjectionMode, InjectionPolicy, Injector, LemmingProbe};
pub use schedule::{moving_average, Cadence, Schedule};

use crate::agent::DdqnAgent;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oracle::{QueryFamily, VerdictKind};
use crate::replay::{Origin, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingOptions {
    pub max_steps: u64,
    pub max_episodes: Option<u64>,
    /// Stop as soon as the moving average reaches the environment's threshold.
    pub stop_when_solved: bool,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            max_steps: 500_000,
            max_episodes: None,
            stop_when_solved: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub steps: u64,
    pub reward: f64,
    pub moving_avg: f64,
    pub epsilon: f64,
    pub lemmings: u64,
    pub injected: u64,
    pub solved_flag: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictTag {
    Sat,
    Unsat,
    Timeout,
}

/// One oracle call during training. `query` indexes the family entries.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictRecord {
    /// Episodes completed when the query ran.
    pub episode: u64,
    pub step: u64,
    pub query: usize,
    pub verdict: VerdictTag,
    pub witness: Option<Vec<f64>>,
    pub injected_action: Option<usize>,
    pub injected_reward: Option<f64>,
    pub wall_secs: f64,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    episode: u64,
    step: u64,
    label: &'a str,
    verdict: VerdictTag,
    witness: &'a Option<Vec<f64>>,
    injected_action: Option<usize>,
    injected_reward: Option<f64>,
    wall_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: &'a Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeRow>,
    pub verdicts: Vec<VerdictRecord>,
    /// Episode count at which the moving average first met the threshold.
    pub episodes_to_solve: Option<u64>,
    pub lemmings: u64,
    pub injected: u64,
    pub total_steps: u64,
    pub query_rounds: u64,
    /// Episodes completed when the reward cutoff closed the query gate.
    pub querying_stopped_after: Option<u64>,
}

impl RunMetrics {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn final_moving_average(&self) -> Option<f64> {
        self.episodes.last().map(|e| e.moving_avg)
    }

    pub fn sat_count(&self) -> u64 {
        self.verdicts
            .iter()
            .filter(|v| v.verdict == VerdictTag::Sat)
            .count() as u64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.episodes {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_verdicts(&self, path: &Path, family: &QueryFamily) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.verdicts {
            let line = VerdictLine {
                episode: v.episode,
                step: v.step,
                label: family.entries.get(v.query).map_or("?", |e| e.label.as_str()),
                verdict: v.verdict,
                witness: &v.witness,
                injected_action: v.injected_action,
                injected_reward: v.injected_reward,
                wall_secs: v.wall_secs,
                error: &v.error,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub struct TrainingSetup<'a> {
    pub family: &'a QueryFamily,
    pub schedule: &'a Schedule,
    pub injector: &'a Injector,
    /// Lemming counting; only gridworlds provide one.
    pub probe: Option<&'a LemmingProbe>,
    pub options: &'a TrainingOptions,
    /// Seeds the per-episode environment resets.
    pub seed: u64,
}

/// Observer called after every completed episode.
pub trait EpisodeHook {
    fn episode_end(&mut self, row: &EpisodeRow, agent: &DdqnAgent) -> Result<()>;
}

impl<F: FnMut(&EpisodeRow, &DdqnAgent) -> Result<()>> EpisodeHook for F {
    fn episode_end(&mut self, row: &EpisodeRow, agent: &DdqnAgent) -> Result<()> {
        self(row, agent)
    }
}

struct Loop<'a, 'b> {
    setup: &'b TrainingSetup<'a>,
    agent: &'b mut DdqnAgent,
    metrics: RunMetrics,
    rewards: Vec<f64>,
    querying: bool,
}

impl Loop<'_, '_> {
    fn gate_open(&self) -> bool {
        self.querying && self.setup.schedule.below_cutoff(&self.rewards)
    }

    fn run_queries(&mut self) -> Result<()> {
        let family = self.setup.family;
        let snapshot = self.agent.online().clone();
        let results = family.evaluate(&snapshot, self.setup.schedule.budget);
        self.metrics.query_rounds += 1;
        let episode = self.rewards.len() as u64;
        let step = self.metrics.total_steps;
        for (query, result) in results.into_iter().enumerate() {
            let mut record = VerdictRecord {
                episode,
                step,
                query,
                verdict: VerdictTag::Timeout,
                witness: None,
                injected_action: None,
                injected_reward: None,
                wall_secs: 0.0,
                error: None,
            };
            match result {
                Ok(v) => {
                    record.wall_secs = v.stats.wall_secs;
                    match v.kind {
                        VerdictKind::Sat { witness } => {
                            let action = family.injection_action_for(&snapshot, &witness);
                            let t = self.setup.injector.transition(witness.clone(), action)?;
                            record.verdict = VerdictTag::Sat;
                            record.injected_action = Some(action);
                            record.injected_reward = Some(t.reward);
                            record.witness = Some(witness);
                            self.agent.remember(t)?;
                            self.metrics.injected += 1;
                        }
                        VerdictKind::Unsat => record.verdict = VerdictTag::Unsat,
                        VerdictKind::Timeout => {}
                    }
                }
                Err(e) => {
                    log::warn!("oracle query {} failed: {e}", family.entries[query].label);
                    record.error = Some(e.to_string());
                }
            }
            self.metrics.verdicts.push(record);
        }
        Ok(())
    }
}

/// Runs ε-greedy DDQN on `env`, consulting the oracle as scheduled.
///
/// Environment resets draw from their own seeded stream and the oracle uses
/// no randomness, so an empty family reproduces plain DDQN exactly.
pub fn run_training(
    env: &mut dyn Environment,
    agent: &mut DdqnAgent,
    setup: &TrainingSetup<'_>,
    hook: &mut dyn EpisodeHook,
) -> Result<RunMetrics> {
    setup.schedule.validate()?;
    if env.observation_dim() != agent.online().input_dim() || env.n_actions() != agent.n_actions() {
        return Err(Error::invalid("agent network does not match the environment"));
    }
    setup.family.validate(env.observation_dim(), env.n_actions())?;

    let threshold = env.solve_threshold();
    let window = setup.schedule.window;
    let every_step = setup.schedule.cadence == Cadence::EveryStep;
    let mut reset_rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut state = Loop {
        setup,
        agent,
        metrics: RunMetrics::default(),
        rewards: Vec::new(),
        querying: !setup.family.is_empty(),
    };

    'episodes: while state.metrics.total_steps < setup.options.max_steps {
        if setup
            .options
            .max_episodes
            .is_some_and(|m| state.rewards.len() as u64 >= m)
        {
            break;
        }
        let mut obs = env.reset(reset_rng.gen());
        let mut episode_reward = 0.0;
        loop {
            let action = state.agent.act(&obs, true)?;
            let step = env.step(action)?;
            state.metrics.total_steps += 1;
            episode_reward += step.reward;
            state.agent.observe(Transition {
                state: obs,
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                terminal: step.terminal,
                origin: Origin::Environment,
            })?;
            if every_step && state.gate_open() {
                state.run_queries()?;
            }
            if let Some(probe) = setup.probe {
                state.metrics.lemmings += count_lemmings(state.agent.online(), probe) as u64;
            }
            let done = step.done();
            obs = step.observation;
            if done {
                break;
            }
            if state.metrics.total_steps >= setup.options.max_steps {
                // budget ran out mid-episode; the partial episode is not recorded
                break 'episodes;
            }
        }
        state.agent.decay_epsilon();
        state.rewards.push(episode_reward);
        let completed = state.rewards.len() as u64;
        let moving_avg = moving_average(&state.rewards, window).expect("non-empty");
        let solved = state.rewards.len() >= window && moving_avg >= threshold;
        if solved && state.metrics.episodes_to_solve.is_none() {
            state.metrics.episodes_to_solve = Some(completed);
        }
        if !every_step && setup.schedule.fires_after_episode(completed) && state.gate_open() {
            state.run_queries()?;
        }
        if state.querying && !setup.schedule.below_cutoff(&state.rewards) {
            state.querying = false;
            state.metrics.querying_stopped_after = Some(completed);
        }
        let row = EpisodeRow {
            episode: completed,
            steps: state.metrics.total_steps,
            reward: episode_reward,
            moving_avg,
            epsilon: state.agent.epsilon(),
            lemmings: state.metrics.lemmings,
            injected: state.metrics.injected,
            solved_flag: state.metrics.episodes_to_solve.is_some(),
        };
        hook.episode_end(&row, state.agent)?;
        state.metrics.episodes.push(row);
        if solved && setup.options.stop_when_solved {
            break;
        }
    }
    Ok(state.metrics)
}
