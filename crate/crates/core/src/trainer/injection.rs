use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::Gridworld;
use crate::error::{Error, Result};
use crate::mdp::make_dagger;
use crate::nn::{argmax, Mlp};
use crate::oracle::QueryFamily;
use crate::replay::Transition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InjectionMode {
    /// Constant reward; `None` uses the query family's injection reward.
    FixedPenalty {
        #[serde(default)]
        reward: Option<f64>,
    },
    /// `-1 + min_pi Q(s, a)` from the exact tabular model.
    TheoreticalDagger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionPolicy {
    #[serde(flatten)]
    pub mode: InjectionMode,
    pub treat_as_terminal: bool,
}

impl Default for InjectionPolicy {
    fn default() -> Self {
        Self {
            mode: InjectionMode::FixedPenalty { reward: None },
            treat_as_terminal: true,
        }
    }
}

fn key(observation: &[f64]) -> Vec<u64> {
    observation.iter().map(|v| v.to_bits()).collect()
}

/// Resolved injection rule used by the training loop.
#[derive(Clone, Debug)]
pub struct Injector {
    fixed: Option<f64>,
    dagger: HashMap<(Vec<u64>, usize), f64>,
    terminal: bool,
}

impl Injector {
    pub fn fixed(reward: f64) -> Self {
        Self {
            fixed: Some(reward),
            dagger: HashMap::new(),
            terminal: true,
        }
    }

    /// Penalized rewards for every bad pair of `env`'s tabular model.
    pub fn dagger(env: &dyn Gridworld, gamma: f64) -> Result<Self> {
        let (mdp, bad) = env.to_tabular(gamma)?;
        let dagger = make_dagger(&mdp, &bad)?;
        let table = bad
            .pairs
            .iter()
            .map(|&(s, a)| ((key(&env.encode(s)), a), dagger.reward(s, a)))
            .collect();
        Ok(Self {
            fixed: None,
            dagger: table,
            terminal: true,
        })
    }

    pub fn from_policy(
        policy: &InjectionPolicy,
        family: &QueryFamily,
        gridworld: Option<&dyn Gridworld>,
        gamma: f64,
    ) -> Result<Self> {
        let mut injector = match policy.mode {
            InjectionMode::FixedPenalty { reward } => {
                Self::fixed(reward.unwrap_or(family.injection_reward))
            }
            InjectionMode::TheoreticalDagger => {
                let env = gridworld.ok_or_else(|| {
                    Error::Unsupported("theoretical_dagger injection needs a tabular environment".into())
                })?;
                Self::dagger(env, gamma)?
            }
        };
        injector.terminal = policy.treat_as_terminal;
        Ok(injector)
    }

    pub fn reward(&self, witness: &[f64], action: usize) -> Result<f64> {
        if let Some(r) = self.fixed {
            return Ok(r);
        }
        self.dagger
            .get(&(key(witness), action))
            .copied()
            .ok_or_else(|| Error::invalid("injected pair is not in the bad set"))
    }

    /// Transition added to replay for a witness.
    pub fn transition(&self, witness: Vec<f64>, action: usize) -> Result<Transition> {
        let reward = self.reward(&witness, action)?;
        if self.terminal {
            return Ok(Transition::injected(witness, action, reward));
        }
        let mut t = Transition::injected(witness.clone(), action, reward);
        t.next_state = witness;
        t.terminal = false;
        Ok(t)
    }
}

/// Hazard-entering pairs of a gridworld grouped by state.
#[derive(Clone, Debug)]
pub struct LemmingProbe {
    entries: Vec<(Vec<f64>, Vec<usize>)>,
}

impl LemmingProbe {
    pub fn for_gridworld(env: &dyn Gridworld, gamma: f64) -> Result<Self> {
        let mut entries: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for (obs, a) in env.unsafe_pairs(gamma)? {
            match entries.iter_mut().find(|(o, _)| *o == obs) {
                Some((_, acts)) => acts.push(a),
                None => entries.push((obs, vec![a])),
            }
        }
        Ok(Self { entries })
    }

    pub fn n_states(&self) -> usize {
        self.entries.len()
    }
}

/// Number of probed states whose greedy action enters a hazard.
pub fn count_lemmings(net: &Mlp, probe: &LemmingProbe) -> usize {
    probe
        .entries
        .iter()
        .filter(|(obs, bad)| bad.contains(&argmax(&net.forward_unchecked(obs))))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AbsentSupervisor, CliffWalk, Environment, DOWN, UP};
    use rand::SeedableRng;

    fn always(action: usize, inputs: usize) -> Mlp {
        let mut bias = vec![0.0; 4];
        bias[action] = 1.0;
        Mlp::from_layers(vec![(vec![0.0; 4 * inputs], bias)]).unwrap()
    }

    #[test]
    fn forced_nets() {
        let env = CliffWalk::new();
        let probe = LemmingProbe::for_gridworld(&env, 0.99).unwrap();
        assert_eq!(count_lemmings(&always(UP, 48), &probe), 0);
        assert_eq!(count_lemmings(&always(DOWN, 48), &probe), 10);
        let env = AbsentSupervisor::new();
        let probe = LemmingProbe::for_gridworld(&env, 0.99).unwrap();
        assert_eq!(count_lemmings(&always(DOWN, 50), &probe), 2);
    }

    #[test]
    fn random_nets_match_brute_force() {
        let env = CliffWalk::new();
        let probe = LemmingProbe::for_gridworld(&env, 0.99).unwrap();
        let (_, bad) = env.to_tabular(0.99).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let net = Mlp::random(&[48, 8, 4], &mut rng).unwrap();
            let brute = (0..48)
                .filter(|&s| bad.contains(s, net.greedy_action(&env.encode(s)).unwrap()))
                .count();
            assert_eq!(count_lemmings(&net, &probe), brute);
        }
    }

    #[test]
    fn dagger_rewards_match_make_dagger() {
        let env = CliffWalk::new();
        let inj = Injector::dagger(&env, 0.99).unwrap();
        let (mdp, bad) = env.to_tabular(0.99).unwrap();
        let d = make_dagger(&mdp, &bad).unwrap();
        for &(s, a) in &bad.pairs {
            assert_eq!(inj.reward(&env.encode(s), a).unwrap(), d.reward(s, a));
            assert!(d.reward(s, a) < -1.0);
        }
        assert!(inj.reward(&env.encode(0), UP).is_err());
    }

    #[test]
    fn injected_transition_shape() {
        let inj = Injector::fixed(-100.0);
        let t = inj.transition(vec![0.5, 1.0], 2).unwrap();
        assert!(t.terminal);
        assert_eq!(t.next_state, vec![0.0, 0.0]);
        assert_eq!(t.reward, -100.0);
        let env = CliffWalk::new();
        assert_eq!(env.observation_dim(), 48);
    }

    #[test]
    fn policy_resolution() {
        let fam = QueryFamily {
            injection_reward: -7.0,
            ..QueryFamily::empty()
        };
        let p = InjectionPolicy::default();
        assert_eq!(Injector::from_policy(&p, &fam, None, 0.99).unwrap().reward(&[], 0).unwrap(), -7.0);
        let p = InjectionPolicy {
            mode: InjectionMode::TheoreticalDagger,
            treat_as_terminal: true,
        };
        assert!(Injector::from_policy(&p, &fam, None, 0.99).is_err());
        let parsed: InjectionPolicy = toml::from_str("mode = \"fixed_penalty\"\nreward = -50.0").unwrap();
        assert_eq!(parsed.mode, InjectionMode::FixedPenalty { reward: Some(-50.0) });
        assert!(parsed.treat_as_terminal);
    }
}
