use std::collections::BTreeSet;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// A (state, action) pair.
pub type Pair = (usize, usize);

/// Finite MDP with terminal pairs and an absorbing dummy state.
///
/// The dummy state is always the last index. Terminal pairs transition to it
/// with probability one, and it loops to itself with zero reward.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    terminal: BTreeSet<Pair>,
    gamma: f64,
}

/// The bad set `B`: pairs a good policy never takes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BadSet {
    pub pairs: BTreeSet<Pair>,
}

impl BadSet {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Self {
        Self {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, state: usize, action: usize) -> bool {
        self.pairs.contains(&(state, action))
    }

    /// Whether `policy` avoids every bad pair (membership in the good set).
    pub fn admits(&self, policy: &PolicyTable) -> bool {
        self.pairs
            .iter()
            .all(|&(s, a)| policy.actions.get(s) != Some(&a))
    }

    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        for &(s, a) in &self.pairs {
            if s >= mdp.n_states() || a >= mdp.n_actions() {
                return Err(Error::invalid(format!("bad pair ({s}, {a}) out of range")));
            }
            if s == mdp.dummy() {
                return Err(Error::invalid("bad set may not contain dummy-state pairs"));
            }
        }
        Ok(())
    }
}

/// Deterministic policy: one action per state, dummy included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolicyTable {
    pub actions: Vec<usize>,
}

impl PolicyTable {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Self {
            actions: vec![action; n_states],
        }
    }

    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        if self.actions.len() != mdp.n_states() {
            return Err(Error::DimensionMismatch {
                expected: mdp.n_states(),
                actual: self.actions.len(),
            });
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= mdp.n_actions()) {
            return Err(Error::invalid(format!("policy action {a} out of range")));
        }
        Ok(())
    }
}

/// Incremental construction over the non-dummy states; `build` appends the dummy.
#[derive(Clone, Debug)]
pub struct MdpBuilder {
    n_real: usize,
    n_actions: usize,
    gamma: f64,
    rows: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
    terminal: BTreeSet<Pair>,
}

impl MdpBuilder {
    pub fn new(n_real_states: usize, n_actions: usize, gamma: f64) -> Self {
        Self {
            n_real: n_real_states,
            n_actions,
            gamma,
            rows: vec![Vec::new(); n_real_states * n_actions],
            rewards: vec![0.0; n_real_states * n_actions],
            terminal: BTreeSet::new(),
        }
    }

    /// Index the dummy state will have.
    pub fn dummy(&self) -> usize {
        self.n_real
    }

    pub fn reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        self.rewards[s * self.n_actions + a] = r;
        self
    }

    /// Sets the successor distribution of `(s, a)` among non-dummy states.
    pub fn transition(&mut self, s: usize, a: usize, row: &[(usize, f64)]) -> &mut Self {
        self.rows[s * self.n_actions + a] = row.to_vec();
        self
    }

    pub fn deterministic(&mut self, s: usize, a: usize, next: usize) -> &mut Self {
        self.transition(s, a, &[(next, 1.0)])
    }

    /// Marks `(s, a)` terminal: it moves to the dummy state.
    pub fn terminal(&mut self, s: usize, a: usize) -> &mut Self {
        self.terminal.insert((s, a));
        self
    }

    pub fn build(&self) -> Result<TabularMdp> {
        let n = self.n_real + 1;
        let na = self.n_actions;
        let mut transitions = vec![0.0; n * na * n];
        let mut rewards = vec![0.0; n * na];
        for s in 0..self.n_real {
            for a in 0..na {
                let idx = s * na + a;
                rewards[idx] = self.rewards[idx];
                let base = idx * n;
                if self.terminal.contains(&(s, a)) {
                    transitions[base + self.n_real] = 1.0;
                    continue;
                }
                for &(next, p) in &self.rows[idx] {
                    if next >= n {
                        return Err(Error::InvalidMdp(format!(
                            "({s}, {a}) transitions to unknown state {next}"
                        )));
                    }
                    transitions[base + next] += p;
                }
            }
        }
        for a in 0..na {
            transitions[(self.n_real * na + a) * n + self.n_real] = 1.0;
        }
        TabularMdp::from_parts(n, na, transitions, rewards, self.terminal.clone(), self.gamma)
    }
}

impl TabularMdp {
    /// Builds and validates an MDP from dense tables. `n_states` includes the dummy.
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        terminal: BTreeSet<Pair>,
        gamma: f64,
    ) -> Result<Self> {
        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            terminal,
            gamma,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, na) = (self.n_states, self.n_actions);
        if n < 1 || na < 1 {
            return Err(Error::InvalidMdp("need at least one state and action".into()));
        }
        if self.transitions.len() != n * na * n || self.rewards.len() != n * na {
            return Err(Error::InvalidMdp("table sizes do not match dimensions".into()));
        }
        // gamma = 1 is admitted for undiscounted shortest-path checks; evaluation
        // then only converges for proper policies.
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidMdp(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if let Some(r) = self.rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("non-finite reward {r}")));
        }
        let dummy = self.dummy();
        for s in 0..n {
            for a in 0..na {
                let row = self.row(s, a);
                if row.iter().any(|&p| !(0.0..=1.0 + ROW_SUM_TOL).contains(&p)) {
                    return Err(Error::InvalidMdp(format!("({s}, {a}) has a probability outside [0, 1]")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidMdp(format!(
                        "transition row ({s}, {a}) sums to {sum}"
                    )));
                }
            }
        }
        for a in 0..na {
            if self.p(dummy, a, dummy) != 1.0 || self.reward(dummy, a) != 0.0 {
                return Err(Error::InvalidMdp(
                    "dummy state must self-loop with zero reward".into(),
                ));
            }
        }
        for &(s, a) in &self.terminal {
            if s >= n || a >= na {
                return Err(Error::InvalidMdp(format!("terminal pair ({s}, {a}) out of range")));
            }
            if self.p(s, a, dummy) != 1.0 {
                return Err(Error::InvalidMdp(format!(
                    "terminal pair ({s}, {a}) must move to the dummy state"
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dummy(&self) -> usize {
        self.n_states - 1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        m.gamma = gamma;
        m.validate()?;
        Ok(m)
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + next]
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    pub(crate) fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &mut self.transitions[base..base + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub(crate) fn set_reward(&mut self, s: usize, a: usize, r: f64) {
        self.rewards[s * self.n_actions + a] = r;
    }

    pub fn terminal_pairs(&self) -> &BTreeSet<Pair> {
        &self.terminal
    }

    pub(crate) fn terminal_mut(&mut self) -> &mut BTreeSet<Pair> {
        &mut self.terminal
    }

    pub fn is_terminal(&self, s: usize, a: usize) -> bool {
        self.terminal.contains(&(s, a))
    }

    /// Expected next-state value `sum_s' p(s, a, s') v(s')`.
    #[inline]
    pub fn expected(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        self.row(s, a)
            .iter()
            .zip(values)
            .filter(|(p, _)| **p != 0.0)
            .map(|(p, v)| p * v)
            .sum()
    }

    /// Whether every transition row is one-hot.
    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states).all(|s| {
            (0..self.n_actions).all(|a| self.row(s, a).iter().filter(|&&p| p != 0.0).count() == 1)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MdpBuilder {
        let mut b = MdpBuilder::new(2, 2, 0.9);
        b.deterministic(0, 0, 1).deterministic(0, 1, 0);
        b.deterministic(1, 0, 0).terminal(1, 1);
        b.reward(1, 1, 1.0);
        b
    }

    #[test]
    fn builder_appends_dummy() {
        let m = two_state().build().unwrap();
        assert_eq!(m.n_states(), 3);
        assert_eq!(m.dummy(), 2);
        assert_eq!(m.p(1, 1, 2), 1.0);
        for a in 0..2 {
            assert_eq!(m.p(2, a, 2), 1.0);
            assert_eq!(m.reward(2, a), 0.0);
        }
    }

    #[test]
    fn rows_must_sum_to_one() {
        let mut b = two_state();
        b.transition(0, 0, &[(1, 0.5)]);
        assert!(matches!(b.build(), Err(Error::InvalidMdp(_))));
    }

    #[test]
    fn rewards_must_be_finite() {
        let mut b = two_state();
        b.reward(0, 0, f64::INFINITY);
        assert!(b.build().is_err());
    }

    #[test]
    fn bad_set_rejects_dummy_pairs() {
        let m = two_state().build().unwrap();
        assert!(BadSet::new([(2, 0)]).validate(&m).is_err());
        assert!(BadSet::new([(0, 1)]).validate(&m).is_ok());
    }

    #[test]
    fn good_policy_membership() {
        let b = BadSet::new([(0, 1)]);
        assert!(b.admits(&PolicyTable::new(vec![0, 1, 0])));
        assert!(!b.admits(&PolicyTable::new(vec![1, 0, 0])));
    }
}
