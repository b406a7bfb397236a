//! Randomized checks of the `M` / `M†` equivalence on small MDPs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::dagger::{check_equivalence, make_dagger, policy_preservation};
use super::model::{BadSet, MdpBuilder, PolicyTable, TabularMdp};
use super::solve::{all_policies, optimal_policies_exhaustive, value_iteration};
use crate::error::Result;

/// Minimum gap between the best and any other action's `Q*` in generated instances.
pub const MIN_ACTION_GAP: f64 = 1e-3;

/// Random MDP over `n_real` states: rewards in `[-1, 1]`, a fraction of pairs
/// terminal, the rest with deterministic or sparse stochastic successors.
pub fn random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    n_real: usize,
    n_actions: usize,
    gamma: f64,
) -> Result<TabularMdp> {
    let mut b = MdpBuilder::new(n_real, n_actions, gamma);
    for s in 0..n_real {
        for a in 0..n_actions {
            b.reward(s, a, rng.gen_range(-1.0..=1.0));
            let roll: f64 = rng.gen();
            if roll < 0.2 {
                b.terminal(s, a);
            } else if roll < 0.6 {
                b.deterministic(s, a, rng.gen_range(0..n_real));
            } else {
                let mut weights: Vec<f64> = (0..n_real)
                    .map(|_| if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 })
                    .collect();
                weights[rng.gen_range(0..n_real)] += 0.1;
                let total: f64 = weights.iter().sum();
                let row: Vec<(usize, f64)> = weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(i, w)| (i, w / total))
                    .collect();
                b.transition(s, a, &row);
            }
        }
    }
    b.build()
}

/// Whether every suboptimal action is at least `gap` below the best in `Q*`.
pub fn well_separated(mdp: &TabularMdp, gap: f64) -> Result<bool> {
    let q = value_iteration(mdp)?.q;
    Ok((0..mdp.dummy()).all(|s| {
        let row = q.row(s);
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.iter().all(|&v| v == best || v <= best - gap)
    }))
}

/// Random non-empty bad set that leaves at least one good action per state.
pub fn random_bad_set<R: Rng + ?Sized>(rng: &mut R, mdp: &TabularMdp, density: f64) -> BadSet {
    let n_real = mdp.dummy();
    let na = mdp.n_actions();
    loop {
        let mut pairs = Vec::new();
        for s in 0..n_real {
            let mut actions: Vec<usize> = (0..na).collect();
            actions.shuffle(rng);
            // keep the first shuffled action good
            for &a in &actions[1..] {
                if rng.gen_bool(density) {
                    pairs.push((s, a));
                }
            }
        }
        if !pairs.is_empty() {
            return BadSet::new(pairs);
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TheorySummary {
    pub instances: usize,
    pub compatible: usize,
    pub compatible_equal: usize,
    pub violating: usize,
    /// Violations confirmed by brute-force enumeration of `Opt(M)`.
    pub violating_confirmed: usize,
    /// Instances whose value-iteration optimal set matched enumeration (both MDPs).
    pub exhaustive_agreement: usize,
    pub opt_preserved: usize,
    pub dagger_avoids_bad: usize,
    /// Violating instances whose `M†` optimal policies still avoid the bad set.
    /// Informational: without strong compatibility nothing guarantees it.
    pub dagger_avoids_bad_violating: usize,
    /// Largest `|V^pi_M - V^pi_M†|` over good policies of compatible instances.
    pub max_value_gap: f64,
    /// Largest `|Q^pi_M - Q^pi_M†|` off the bad set.
    pub max_q_gap_outside: f64,
    /// Smallest `Q^pi_M - Q^pi_M†` on the bad set.
    pub min_q_drop_on_bad: f64,
}

impl TheorySummary {
    pub fn all_hold(&self) -> bool {
        self.compatible_equal == self.compatible
            && self.violating_confirmed == self.violating
            && self.exhaustive_agreement == self.instances
            && self.opt_preserved == self.compatible
            && self.dagger_avoids_bad == self.compatible
            && self.max_value_gap <= 1e-8
            && self.max_q_gap_outside <= 1e-8
            && self.min_q_drop_on_bad > 0.0
    }
}

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

/// Generates instances until `target_compatible` strongly-compatible ones have been checked.
///
/// Instances violating strong compatibility are also checked: their violation must be
/// confirmed by enumeration; whether their `M†` optimum avoids the bad set is only recorded.
pub fn run_theorem_suite<R: Rng + ?Sized>(rng: &mut R, target_compatible: usize) -> Result<TheorySummary> {
    let mut summary = TheorySummary {
        min_q_drop_on_bad: f64::INFINITY,
        ..Default::default()
    };
    while summary.compatible < target_compatible {
        let n_real = rng.gen_range(1..=5);
        let na = rng.gen_range(2..=3);
        let gamma = GAMMAS[rng.gen_range(0..GAMMAS.len())];
        let mdp = random_mdp(rng, n_real, na, gamma)?;
        if !well_separated(&mdp, MIN_ACTION_GAP)? {
            continue;
        }
        let bad = random_bad_set(rng, &mdp, 0.35);
        let report = check_equivalence(&mdp, &bad)?;
        let dagger = make_dagger(&mdp, &bad)?;
        summary.instances += 1;

        let brute = optimal_policies_exhaustive(&mdp)?;
        let brute_dagger = optimal_policies_exhaustive(&dagger)?;
        let agree = |set: &super::solve::OptimalPolicySet, list: &[PolicyTable]| {
            set.count() == list.len() as u128 && list.iter().all(|p| set.contains(p))
        };
        if agree(&report.opt_original, &brute) && agree(&report.opt_dagger, &brute_dagger) {
            summary.exhaustive_agreement += 1;
        }
        let avoids_bad = report.dagger_optimal_avoid_bad && brute_dagger.iter().all(|p| bad.admits(p));

        if !report.strong_compat_holds {
            summary.violating += 1;
            if avoids_bad {
                summary.dagger_avoids_bad_violating += 1;
            }
            if brute.iter().any(|p| !bad.admits(p)) {
                summary.violating_confirmed += 1;
            }
            continue;
        }

        summary.compatible += 1;
        if avoids_bad {
            summary.dagger_avoids_bad += 1;
        }
        if report.equal {
            summary.compatible_equal += 1;
        }
        if report.original_optimal_in_dagger
            && brute.iter().all(|p| report.opt_dagger.contains(p))
        {
            summary.opt_preserved += 1;
        }
        for policy in all_policies(&mdp)?.iter().filter(|p| bad.admits(p)) {
            let pres = policy_preservation(&mdp, &dagger, &bad, policy)?;
            summary.max_value_gap = summary.max_value_gap.max(pres.value_gap);
            summary.max_q_gap_outside = summary.max_q_gap_outside.max(pres.q_gap_outside);
            summary.min_q_drop_on_bad = summary.min_q_drop_on_bad.min(pres.q_drop_on_bad);
        }
    }
    Ok(summary)
}
