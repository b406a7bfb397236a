use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// After every environment step.
    EveryStep,
    /// After every n-th completed episode.
    EveryEpisodes(u64),
}

/// When the oracle is consulted during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub cadence: Cadence,
    /// Querying stops for good once the moving average reaches this value.
    pub reward_cutoff: f64,
    pub window: usize,
    pub budget: Budget,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            cadence: Cadence::EveryEpisodes(100),
            reward_cutoff: 200.0,
            window: 100,
            budget: Budget::default(),
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("schedule.window", "must be positive"));
        }
        if self.cadence == Cadence::EveryEpisodes(0) {
            return Err(Error::config("schedule.cadence", "episode interval must be positive"));
        }
        if self.reward_cutoff.is_nan() {
            return Err(Error::config("schedule.reward_cutoff", "must be a number"));
        }
        Ok(())
    }

    /// Whether episode `completed` (1-based count) is in the query set.
    pub fn fires_after_episode(&self, completed: u64) -> bool {
        match self.cadence {
            Cadence::EveryEpisodes(n) => completed > 0 && completed % n == 0,
            Cadence::EveryStep => false,
        }
    }

    /// Moving-average half of the gate; an empty history counts as -inf.
    pub fn below_cutoff(&self, rewards: &[f64]) -> bool {
        moving_average(rewards, self.window).map_or(true, |m| m < self.reward_cutoff)
    }
}

/// Mean of the last `min(window, n)` rewards, `None` when empty.
pub fn moving_average(rewards: &[f64], window: usize) -> Option<f64> {
    if rewards.is_empty() || window == 0 {
        return None;
    }
    let tail = &rewards[rewards.len().saturating_sub(window)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[], 100), None);
        assert_eq!(moving_average(&[3.0; 7], 100), Some(3.0));
        assert_eq!(moving_average(&[1.0, 2.0, 6.0], 100), Some(3.0));
        let ramp: Vec<f64> = (1..=200).map(f64::from).collect();
        assert_eq!(moving_average(&ramp, 100), Some(150.5));
    }

    #[test]
    fn gate() {
        let s = Schedule {
            cadence: Cadence::EveryEpisodes(10),
            reward_cutoff: 0.0,
            window: 2,
            ..Schedule::default()
        };
        assert!(s.fires_after_episode(10) && s.fires_after_episode(20));
        assert!(!s.fires_after_episode(0) && !s.fires_after_episode(15));
        assert!(s.below_cutoff(&[]));
        assert!(s.below_cutoff(&[5.0, -1.0, -2.0]));
        assert!(!s.below_cutoff(&[-5.0, 1.0, -1.0]));
    }

    #[test]
    fn toml_forms() {
        let s: Schedule = toml::from_str("cadence = \"every_step\"\nreward_cutoff = -30.0").unwrap();
        assert_eq!(s.cadence, Cadence::EveryStep);
        assert_eq!(s.window, 100);
        let s: Schedule = toml::from_str("cadence = { every_episodes = 25 }").unwrap();
        assert_eq!(s.cadence, Cadence::EveryEpisodes(25));
        let bad = Schedule {
            window: 0,
            ..Schedule::default()
        };
        assert!(bad.validate().is_err());
    }
}
