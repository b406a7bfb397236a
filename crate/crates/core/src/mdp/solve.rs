//! Policy evaluation, optimal and pessimal value iteration, optimal-policy sets.

use super::model::{PolicyTable, TabularMdp};
use crate::error::{Error, Result};

/// Ties in Q within this tolerance count as co-optimal actions.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Sup-norm tolerance for "V^pi = V*" in exhaustive enumeration.
pub const VALUE_TOLERANCE: f64 = 1e-8;
/// Largest policy count the exhaustive route will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e7;

const ACCURACY: f64 = 1e-11;
const MAX_SWEEPS: usize = 200_000;

/// Action-value table indexed `[state][action]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn converged(delta: f64, gamma: f64, values: &[f64]) -> bool {
    if delta == 0.0 {
        return true;
    }
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let noise = 8.0 * f64::EPSILON * scale;
    if gamma < 1.0 {
        // ||V_k - V|| <= gamma / (1 - gamma) * ||V_k - V_{k-1}||
        delta * gamma / (1.0 - gamma) <= ACCURACY || delta <= noise
    } else {
        delta <= noise
    }
}

/// `V^pi` by iterating the policy's Bellman operator to a fixed point.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &PolicyTable) -> Result<Vec<f64>> {
    policy.validate(mdp)?;
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        for s in 0..n {
            let a = policy.actions[s];
            next[s] = mdp.reward(s, a) + gamma * mdp.expected(s, a, &v);
        }
        next[mdp.dummy()] = 0.0;
        let delta = sup_diff(&next, &v);
        std::mem::swap(&mut v, &mut next);
        if converged(delta, gamma, &v) {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence(MAX_SWEEPS))
}

fn q_from_values(mdp: &TabularMdp, values: &[f64]) -> QTable {
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let v = if s == mdp.dummy() {
                0.0
            } else {
                mdp.reward(s, a) + mdp.gamma() * mdp.expected(s, a, values)
            };
            q.set(s, a, v);
        }
    }
    q
}

/// `Q^pi(s, a) = r(s, a) + gamma * E[V^pi(s')]`.
pub fn q_values(mdp: &TabularMdp, policy: &PolicyTable) -> Result<QTable> {
    let v = policy_evaluation(mdp, policy)?;
    Ok(q_from_values(mdp, &v))
}

/// Output of optimal or pessimal value iteration.
#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    pub q: QTable,
    /// Sup-norm change of each sweep, in order.
    pub residuals: Vec<f64>,
}

fn bellman_iteration(mdp: &TabularMdp, maximize: bool) -> Result<ValueIteration> {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    for _ in 0..MAX_SWEEPS {
        for s in 0..n {
            let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
            for a in 0..na {
                let q = mdp.reward(s, a) + gamma * mdp.expected(s, a, &v);
                best = if maximize { best.max(q) } else { best.min(q) };
            }
            next[s] = best;
        }
        next[mdp.dummy()] = 0.0;
        let delta = sup_diff(&next, &v);
        residuals.push(delta);
        std::mem::swap(&mut v, &mut next);
        if converged(delta, gamma, &v) {
            let q = q_from_values(mdp, &v);
            return Ok(ValueIteration {
                values: v,
                q,
                residuals,
            });
        }
    }
    Err(Error::NonConvergence(MAX_SWEEPS))
}

/// Optimal values `V*` and `Q*`.
pub fn value_iteration(mdp: &TabularMdp) -> Result<ValueIteration> {
    bellman_iteration(mdp, true)
}

/// Fixed point of `Q(s,a) = r(s,a) + gamma * E[min_a' Q(s',a')]`, which equals
/// the pointwise minimum of `Q^pi` over deterministic policies.
pub fn pessimal_q(mdp: &TabularMdp) -> Result<QTable> {
    Ok(bellman_iteration(mdp, false)?.q)
}

/// The set of optimal deterministic policies, stored as a product of per-state
/// argmax sets over the non-dummy states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimalPolicySet {
    pub argmax: Vec<Vec<usize>>,
}

impl OptimalPolicySet {
    fn from_q(q: &QTable, n_real: usize) -> Self {
        let argmax = (0..n_real)
            .map(|s| {
                let row = q.row(s);
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (0..row.len())
                    .filter(|&a| row[a] >= best - TIE_TOLERANCE)
                    .collect()
            })
            .collect();
        Self { argmax }
    }

    /// Number of optimal policies (saturating).
    pub fn count(&self) -> u128 {
        self.argmax
            .iter()
            .fold(1u128, |acc, set| acc.saturating_mul(set.len() as u128))
    }

    pub fn contains(&self, policy: &PolicyTable) -> bool {
        self.argmax
            .iter()
            .enumerate()
            .all(|(s, set)| policy.actions.get(s).is_some_and(|a| set.contains(a)))
    }

    pub fn is_subset_of(&self, other: &OptimalPolicySet) -> bool {
        self.argmax.len() == other.argmax.len()
            && self
                .argmax
                .iter()
                .zip(&other.argmax)
                .all(|(a, b)| a.iter().all(|x| b.contains(x)))
    }

    /// Whether some optimal policy takes action `a` in state `s`.
    pub fn allows(&self, s: usize, a: usize) -> bool {
        self.argmax.get(s).is_some_and(|set| set.contains(&a))
    }

    /// Every optimal policy as an explicit table (dummy action 0).
    pub fn enumerate(&self) -> Result<Vec<PolicyTable>> {
        let count = self.count() as f64;
        if count > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut out = vec![Vec::with_capacity(self.argmax.len() + 1)];
        for set in &self.argmax {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    set.iter().map(move |&a| {
                        let mut p = prefix.clone();
                        p.push(a);
                        p
                    })
                })
                .collect();
        }
        Ok(out
            .into_iter()
            .map(|mut actions| {
                actions.push(0);
                PolicyTable::new(actions)
            })
            .collect())
    }
}

/// Optimal policies via value iteration and per-state argmax sets.
pub fn optimal_policies(mdp: &TabularMdp) -> Result<OptimalPolicySet> {
    let vi = value_iteration(mdp)?;
    Ok(OptimalPolicySet::from_q(&vi.q, mdp.n_states() - 1))
}

fn policy_count(mdp: &TabularMdp) -> f64 {
    (mdp.n_actions() as f64).powi(mdp.n_states() as i32 - 1)
}

/// Every deterministic policy (dummy action fixed to 0), guarded by [`ENUMERATION_LIMIT`].
pub fn all_policies(mdp: &TabularMdp) -> Result<Vec<PolicyTable>> {
    let count = policy_count(mdp);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n_real = mdp.n_states() - 1;
    let na = mdp.n_actions();
    let mut out = Vec::with_capacity(count as usize);
    let mut digits = vec![0usize; n_real];
    loop {
        let mut actions = digits.clone();
        actions.push(0);
        out.push(PolicyTable::new(actions));
        let mut i = 0;
        loop {
            if i == n_real {
                return Ok(out);
            }
            digits[i] += 1;
            if digits[i] < na {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Optimal policies by brute force: evaluate every policy, keep those whose
/// value matches the pointwise maximum within [`VALUE_TOLERANCE`].
pub fn optimal_policies_exhaustive(mdp: &TabularMdp) -> Result<Vec<PolicyTable>> {
    let policies = all_policies(mdp)?;
    let values = policies
        .iter()
        .map(|p| policy_evaluation(mdp, p))
        .collect::<Result<Vec<_>>>()?;
    let n = mdp.n_states();
    let best: Vec<f64> = (0..n)
        .map(|s| values.iter().map(|v| v[s]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(policies
        .into_iter()
        .zip(values)
        .filter(|(_, v)| sup_diff(v, &best) <= VALUE_TOLERANCE)
        .map(|(p, _)| p)
        .collect())
}
