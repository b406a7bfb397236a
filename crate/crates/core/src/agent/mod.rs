//! Double DQN with prioritized replay and soft target updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, AdamConfig, AdamState, Gradients, Mlp};
use crate::replay::{PerConfig, PrioritizedBuffer, SampleIndex, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Environment steps between learning updates.
    pub replay_every: usize,
    pub replay: PerConfig,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub hidden: Vec<usize>,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-3,
            tau: 1e-2,
            batch_size: 64,
            replay_every: 2,
            replay: PerConfig::default(),
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay: 0.995,
            hidden: vec![32, 32],
            grad_clip: Some(10.0),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("learning_rate", self.learning_rate),
            ("tau", self.tau),
            ("replay.alpha", self.replay.alpha),
            ("replay.beta", self.replay.beta),
            ("replay.epsilon", self.replay.epsilon),
            ("epsilon_decay", self.epsilon_decay),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.gamma >= 1.0 {
            return Err(Error::config("gamma", "must be < 1"));
        }
        if self.tau > 1.0 {
            return Err(Error::config("tau", "must be <= 1"));
        }
        if self.epsilon_decay > 1.0 {
            return Err(Error::config("epsilon_decay", "must be <= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config("epsilon_start", "epsilon bounds must lie in [0, 1]"));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::config("epsilon_end", "must not exceed epsilon_start"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.replay_every == 0 {
            return Err(Error::config("replay_every", "must be positive"));
        }
        if self.replay.capacity == 0 {
            return Err(Error::config("replay.capacity", "must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config("grad_clip", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearnMetrics {
    /// True when the buffer held fewer than `batch_size` entries.
    pub skipped: bool,
    pub mean_abs_td: f64,
    pub loss: f64,
    pub indices: Vec<SampleIndex>,
    pub td_errors: Vec<f64>,
}

pub struct DdqnAgent {
    config: AgentConfig,
    online: Mlp,
    target: Mlp,
    optimizer: AdamState,
    buffer: PrioritizedBuffer,
    epsilon: f64,
    rng: ChaCha8Rng,
    env_steps: u64,
    learn_steps: u64,
}

impl DdqnAgent {
    pub fn new(observation_dim: usize, n_actions: usize, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![observation_dim];
        dims.extend(&config.hidden);
        dims.push(n_actions);
        let online = Mlp::random(&dims, &mut rng)?;
        Self::with_network(online, config, rng)
    }

    /// Starts from given online weights; the target is an exact copy.
    pub fn from_network(online: Mlp, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::with_network(online, config, ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_network(online: Mlp, config: AgentConfig, rng: ChaCha8Rng) -> Result<Self> {
        let optimizer = AdamState::new(
            &online,
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        Ok(Self {
            target: online.clone(),
            optimizer,
            buffer: PrioritizedBuffer::new(config.replay)?,
            epsilon: config.epsilon_start,
            rng,
            env_steps: 0,
            learn_steps: 0,
            online,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn buffer(&self) -> &PrioritizedBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn n_actions(&self) -> usize {
        self.online.output_dim()
    }

    /// ε-greedy when `explore`, greedy otherwise.
    pub fn act(&mut self, observation: &[f64], explore: bool) -> Result<usize> {
        let q = self.online.forward(observation)?;
        if explore && self.rng.gen::<f64>() < self.epsilon {
            return Ok(self.rng.gen_range(0..q.len()));
        }
        Ok(argmax(&q))
    }

    /// Double-Q target: the online net picks the next action, the target net scores it.
    pub fn td_target(&self, t: &Transition) -> f64 {
        if t.terminal {
            return t.reward;
        }
        let next = argmax(&self.online.forward_unchecked(&t.next_state));
        t.reward + self.config.gamma * self.target.forward_unchecked(&t.next_state)[next]
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_end);
    }

    /// Stores an environment transition and learns every `replay_every` steps.
    pub fn observe(&mut self, t: Transition) -> Result<Option<LearnMetrics>> {
        self.check_transition(&t)?;
        self.buffer.push(t);
        self.env_steps += 1;
        if self.env_steps % self.config.replay_every as u64 == 0 {
            return self.learn_step().map(Some);
        }
        Ok(None)
    }

    /// Stores a transition without advancing the step counter.
    pub fn remember(&mut self, t: Transition) -> Result<SampleIndex> {
        self.check_transition(&t)?;
        Ok(self.buffer.push(t))
    }

    fn check_transition(&self, t: &Transition) -> Result<()> {
        let d = self.online.input_dim();
        if t.state.len() != d || t.next_state.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: if t.state.len() != d { t.state.len() } else { t.next_state.len() },
            });
        }
        if t.action >= self.n_actions() {
            return Err(Error::invalid(format!("action {} out of range", t.action)));
        }
        if !t.reward.is_finite() {
            return Err(Error::invalid("non-finite reward"));
        }
        Ok(())
    }

    /// One prioritized, importance-weighted Adam step followed by a soft target update.
    pub fn learn_step(&mut self) -> Result<LearnMetrics> {
        let batch = self.config.batch_size;
        if self.buffer.len() < batch {
            return Ok(LearnMetrics {
                skipped: true,
                ..LearnMetrics::default()
            });
        }
        let sample = self.buffer.sample(batch, self.config.replay.beta, &mut self.rng)?;
        let mut grads = Gradients::zeros_like(&self.online);
        let mut td_errors = Vec::with_capacity(batch);
        let mut loss = 0.0;
        for (t, &w) in sample.transitions.iter().zip(&sample.weights) {
            let y = self.td_target(t);
            let q = self
                .online
                .accumulate_gradient(&t.state, t.action, y, w, &mut grads)?;
            let delta = q - y;
            loss += 0.5 * w * delta * delta;
            td_errors.push(delta);
        }
        let indices = sample.indices;
        let n = batch as f64;
        grads.scale(1.0 / n);
        if let Some(clip) = self.config.grad_clip {
            grads.clip_norm(clip);
        }
        self.optimizer.apply(&mut self.online, &grads)?;
        self.buffer.update_priorities(&indices, &td_errors)?;
        self.target.soft_update(&self.online, self.config.tau)?;
        self.learn_steps += 1;
        Ok(LearnMetrics {
            skipped: false,
            mean_abs_td: td_errors.iter().map(|d| d.abs()).sum::<f64>() / n,
            loss: loss / n,
            indices,
            td_errors,
        })
    }
}
