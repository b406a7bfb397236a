//! The modified MDP `M†` and the equivalence checks between `M` and `M†`.

use serde::Serialize;

use super::model::{BadSet, PolicyTable, TabularMdp};
use super::solve::{optimal_policies, pessimal_q, policy_evaluation, q_values, OptimalPolicySet};
use crate::error::Result;

/// `M†`: every bad pair becomes terminal with reward `-1 + min_pi Q^pi_M(s, a)`.
pub fn make_dagger(mdp: &TabularMdp, bad: &BadSet) -> Result<TabularMdp> {
    bad.validate(mdp)?;
    if bad.is_empty() {
        return Ok(mdp.clone());
    }
    let qmin = pessimal_q(mdp)?;
    let dummy = mdp.dummy();
    let mut out = mdp.clone();
    for &(s, a) in &bad.pairs {
        out.set_reward(s, a, -1.0 + qmin.get(s, a));
        let row = out.row_mut(s, a);
        row.iter_mut().for_each(|p| *p = 0.0);
        row[dummy] = 1.0;
        out.terminal_mut().insert((s, a));
    }
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    #[serde(skip)]
    pub opt_original: OptimalPolicySet,
    #[serde(skip)]
    pub opt_dagger: OptimalPolicySet,
    /// `Opt(M) == Opt(M†)`.
    pub equal: bool,
    /// `Opt(M)` contains only good policies.
    pub strong_compat_holds: bool,
    /// Some policy avoids every bad pair.
    pub bad_set_good_nonempty: bool,
    /// `Opt(M) ⊆ Opt(M†)`.
    pub original_optimal_in_dagger: bool,
    /// No optimal policy of `M†` takes a bad action.
    pub dagger_optimal_avoid_bad: bool,
}

pub fn check_equivalence(mdp: &TabularMdp, bad: &BadSet) -> Result<EquivalenceReport> {
    let dagger = make_dagger(mdp, bad)?;
    let opt_original = optimal_policies(mdp)?;
    let opt_dagger = optimal_policies(&dagger)?;
    let strong_compat_holds = bad.pairs.iter().all(|&(s, a)| !opt_original.allows(s, a));
    let dagger_optimal_avoid_bad = bad.pairs.iter().all(|&(s, a)| !opt_dagger.allows(s, a));
    let bad_set_good_nonempty = (0..mdp.dummy())
        .all(|s| (0..mdp.n_actions()).any(|a| !bad.contains(s, a)));
    Ok(EquivalenceReport {
        equal: opt_original == opt_dagger,
        original_optimal_in_dagger: opt_original.is_subset_of(&opt_dagger),
        strong_compat_holds,
        bad_set_good_nonempty,
        dagger_optimal_avoid_bad,
        opt_original,
        opt_dagger,
    })
}

/// Outcome of comparing a good policy's values in `M` and `M†`.
#[derive(Clone, Debug)]
pub struct PolicyPreservation {
    /// `sup |V^pi_M - V^pi_M†|`.
    pub value_gap: f64,
    /// `sup |Q^pi_M - Q^pi_M†|` over pairs outside the bad set.
    pub q_gap_outside: f64,
    /// `min (Q^pi_M - Q^pi_M†)` over bad pairs (`+inf` when the bad set is empty).
    pub q_drop_on_bad: f64,
}

/// Values of a good policy are unchanged by the dagger construction, and its
/// Q-values change exactly on the bad pairs.
pub fn policy_preservation(
    mdp: &TabularMdp,
    dagger: &TabularMdp,
    bad: &BadSet,
    policy: &PolicyTable,
) -> Result<PolicyPreservation> {
    let v = policy_evaluation(mdp, policy)?;
    let vd = policy_evaluation(dagger, policy)?;
    let q = q_values(mdp, policy)?;
    let qd = q_values(dagger, policy)?;
    let value_gap = v.iter().zip(&vd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut q_gap_outside: f64 = 0.0;
    let mut q_drop_on_bad = f64::INFINITY;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let d = q.get(s, a) - qd.get(s, a);
            if bad.contains(s, a) {
                q_drop_on_bad = q_drop_on_bad.min(d);
            } else {
                q_gap_outside = q_gap_outside.max(d.abs());
            }
        }
    }
    Ok(PolicyPreservation {
        value_gap,
        q_gap_outside,
        q_drop_on_bad,
    })
}
