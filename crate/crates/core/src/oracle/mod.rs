//! Introspection oracle: searches a state region for points where the
//! network's greedy action satisfies a predicate.
//!
//! [`query`] is an interval branch-and-bound. A box is discarded when the
//! interval enclosure of the Q-values proves that no predicate action can be
//! the argmax anywhere in it; otherwise its midpoint is tested exactly, and
//! failing that it is bisected. Boxes narrower than `delta` in every
//! dimension are left undecided, which downgrades a would-be `Unsat` to
//! `Timeout`. A `Sat` answer therefore always comes with a verified witness
//! and `Unsat` only with a complete proof.

mod family;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use family::{
    build_lander_query_family, partition_defect, FamilyEntry, LanderGrid, Query, QueryFamily,
};

use crate::error::{Error, Result};
use crate::nn::{argmax, Interval, Mlp};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionPredicate {
    SelectedActionIn(Vec<usize>),
    SelectedActionIs(usize),
}

impl ActionPredicate {
    pub fn actions(&self) -> Vec<usize> {
        match self {
            ActionPredicate::SelectedActionIn(set) => set.clone(),
            ActionPredicate::SelectedActionIs(a) => vec![*a],
        }
    }

    pub fn holds(&self, action: usize) -> bool {
        match self {
            ActionPredicate::SelectedActionIn(set) => set.contains(&action),
            ActionPredicate::SelectedActionIs(a) => *a == action,
        }
    }

    pub fn validate(&self, n_actions: usize) -> Result<()> {
        let actions = self.actions();
        if actions.is_empty() {
            return Err(Error::invalid("action predicate has an empty action set"));
        }
        if let Some(a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::invalid(format!(
                "predicate action {a} out of range for {n_actions} actions"
            )));
        }
        Ok(())
    }
}

/// A box over the free input dimensions plus exact values for the rest.
///
/// `state_box[k]` constrains the k-th input dimension that is not a key of
/// `fixed_dims`, in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRegion {
    pub state_box: Vec<Interval>,
    #[serde(default, with = "dim_pairs")]
    pub fixed_dims: BTreeMap<usize, f64>,
    pub predicate: ActionPredicate,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

/// Stores `fixed_dims` as `[[dim, value], ...]`; integer map keys do not
/// survive internally tagged enums.
mod dim_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, f64>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, f64>, D::Error> {
        Ok(Vec::<(usize, f64)>::deserialize(d)?.into_iter().collect())
    }
}

fn default_delta() -> f64 {
    1e-3
}

impl QueryRegion {
    pub fn new(state_box: Vec<Interval>, predicate: ActionPredicate) -> Self {
        Self {
            state_box,
            fixed_dims: BTreeMap::new(),
            predicate,
            delta: default_delta(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.state_box.len() + self.fixed_dims.len()
    }

    /// Input dimensions covered by `state_box`, in order.
    pub fn free_dims(&self) -> Vec<usize> {
        (0..self.input_dim())
            .filter(|d| !self.fixed_dims.contains_key(d))
            .collect()
    }

    pub fn validate(&self, net: &Mlp) -> Result<()> {
        if self.input_dim() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                actual: self.input_dim(),
            });
        }
        if let Some(&d) = self.fixed_dims.keys().find(|&&d| d >= net.input_dim()) {
            return Err(Error::invalid(format!("fixed dimension {d} out of range")));
        }
        if self.fixed_dims.values().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fixed dimension values must be finite"));
        }
        if self
            .state_box
            .iter()
            .any(|iv| !(iv.lo <= iv.hi) || !iv.lo.is_finite() || !iv.hi.is_finite())
        {
            return Err(Error::invalid("state box bounds must be finite with lo <= hi"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        self.predicate.validate(net.output_dim())
    }

    pub fn contains(&self, state: &[f64]) -> bool {
        if state.len() != self.input_dim() {
            return false;
        }
        let fixed_ok = self.fixed_dims.iter().all(|(&d, &v)| state[d] == v);
        fixed_ok
            && self
                .free_dims()
                .iter()
                .zip(&self.state_box)
                .all(|(&d, iv)| iv.contains(state[d]))
    }

    /// Expands a free-dimension box into a full input box.
    fn embed(&self, free: &[Interval], free_dims: &[usize]) -> Vec<Interval> {
        let mut full = vec![Interval::point(0.0); self.input_dim()];
        for (&d, &v) in &self.fixed_dims {
            full[d] = Interval::point(v);
        }
        for (&d, iv) in free_dims.iter().zip(free) {
            full[d] = *iv;
        }
        full
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_boxes: u64,
    #[serde(default)]
    pub time_secs: Option<f64>,
}

impl Budget {
    pub fn boxes(max_boxes: u64) -> Self {
        Self {
            max_boxes,
            time_secs: None,
        }
    }

    pub fn doubled(&self) -> Self {
        Self {
            max_boxes: self.max_boxes.saturating_mul(2),
            time_secs: self.time_secs.map(|t| 2.0 * t),
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_boxes: 200_000,
            time_secs: Some(5.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum VerdictKind {
    Sat { witness: Vec<f64> },
    Unsat,
    Timeout,
}

impl VerdictKind {
    pub fn label(&self) -> &'static str {
        match self {
            VerdictKind::Sat { .. } => "sat",
            VerdictKind::Unsat => "unsat",
            VerdictKind::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub boxes: u64,
    pub max_depth: u32,
    pub undecided: u64,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub stats: QueryStats,
}

impl OracleVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self.kind, VerdictKind::Sat { .. })
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self.kind, VerdictKind::Unsat)
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match &self.kind {
            VerdictKind::Sat { witness } => Some(witness),
            _ => None,
        }
    }
}

/// True when the box provably never selects `b`: some other action beats it
/// everywhere, counting lowest-index tie breaking.
fn never_selected(q: &[Interval], b: usize) -> bool {
    q.iter()
        .enumerate()
        .any(|(a, qa)| a != b && (qa.lo > q[b].hi || (a < b && qa.lo >= q[b].hi)))
}

pub fn query(net: &Mlp, region: &QueryRegion, budget: Budget) -> Result<OracleVerdict> {
    region.validate(net)?;
    let start = Instant::now();
    let deadline = budget.time_secs.map(|t| start + Duration::from_secs_f64(t.max(0.0)));
    let free_dims = region.free_dims();
    let bad = region.predicate.actions();
    let scale: Vec<f64> = region
        .state_box
        .iter()
        .map(|iv| if iv.width() > 0.0 { iv.width() } else { 1.0 })
        .collect();

    let mut stats = QueryStats::default();
    let mut stack = vec![(region.state_box.clone(), 0u32)];
    let finish = |kind, mut stats: QueryStats| {
        stats.wall_secs = start.elapsed().as_secs_f64();
        Ok(OracleVerdict { kind, stats })
    };

    while let Some((free, depth)) = stack.pop() {
        if stats.boxes >= budget.max_boxes || deadline.is_some_and(|d| Instant::now() >= d) {
            return finish(VerdictKind::Timeout, stats);
        }
        stats.boxes += 1;
        stats.max_depth = stats.max_depth.max(depth);

        let full = region.embed(&free, &free_dims);
        let q = net.interval_forward_unchecked(&full);
        if bad.iter().all(|&b| never_selected(&q, b)) {
            continue;
        }

        let mid: Vec<f64> = full.iter().map(Interval::midpoint).collect();
        let action = argmax(&net.forward_unchecked(&mid));
        if region.predicate.holds(action) {
            debug_assert!(region.contains(&mid));
            return finish(VerdictKind::Sat { witness: mid }, stats);
        }

        let widest = free
            .iter()
            .zip(&scale)
            .map(|(iv, s)| iv.width() / s)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, w)| if w > acc.1 { (k, w) } else { acc });
        if free.is_empty() || widest.1 < region.delta {
            stats.undecided += 1;
            continue;
        }
        let (left, right) = free[widest.0].bisect();
        if left == free[widest.0] || right == free[widest.0] {
            // cannot split further in floating point
            stats.undecided += 1;
            continue;
        }
        let mut right_box = free.clone();
        right_box[widest.0] = right;
        let mut left_box = free;
        left_box[widest.0] = left;
        stack.push((right_box, depth + 1));
        stack.push((left_box, depth + 1));
    }

    let kind = if stats.undecided > 0 {
        VerdictKind::Timeout
    } else {
        VerdictKind::Unsat
    };
    finish(kind, stats)
}

/// Exhaustive check over an explicit list of states; never times out.
pub fn query_enumerative(
    net: &Mlp,
    states: &[Vec<f64>],
    predicate: &ActionPredicate,
) -> Result<OracleVerdict> {
    if states.is_empty() {
        return Err(Error::invalid("enumerative query needs at least one state"));
    }
    predicate.validate(net.output_dim())?;
    let start = Instant::now();
    let mut stats = QueryStats::default();
    for s in states {
        let action = argmax(&net.forward(s)?);
        stats.boxes += 1;
        if predicate.holds(action) {
            stats.wall_secs = start.elapsed().as_secs_f64();
            return Ok(OracleVerdict {
                kind: VerdictKind::Sat { witness: s.clone() },
                stats,
            });
        }
    }
    stats.wall_secs = start.elapsed().as_secs_f64();
    Ok(OracleVerdict {
        kind: VerdictKind::Unsat,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    /// 2 inputs, 3 actions, output bias fixed so action 0 always wins.
    fn constant_net() -> Mlp {
        Mlp::from_layers(vec![
            (vec![0.3, -0.2, 0.1, 0.4], vec![0.0, 0.0]),
            (vec![0.1, 0.1, -0.1, 0.2, 0.05, 0.0], vec![10.0, 0.0, -1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn constant_network_is_unsat_for_other_actions() {
        let region = QueryRegion::new(vec![iv(-1.0, 1.0), iv(-1.0, 1.0)], ActionPredicate::SelectedActionIs(1));
        let v = query(&constant_net(), &region, Budget::boxes(1000)).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsat);
        assert_eq!(v.stats.boxes, 1);
    }

    #[test]
    fn constant_network_sat_at_first_midpoint() {
        let region = QueryRegion::new(vec![iv(-1.0, 3.0), iv(0.0, 1.0)], ActionPredicate::SelectedActionIs(0));
        let v = query(&constant_net(), &region, Budget::boxes(1000)).unwrap();
        assert_eq!(v.witness(), Some(&[1.0, 0.5][..]));
    }

    #[test]
    fn rejects_bad_regions() {
        let net = constant_net();
        let mut r = QueryRegion::new(vec![iv(0.0, 1.0)], ActionPredicate::SelectedActionIs(0));
        assert!(query(&net, &r, Budget::default()).is_err());
        r.state_box.push(iv(0.0, 1.0));
        r.delta = 0.0;
        assert!(query(&net, &r, Budget::default()).is_err());
        r.delta = 1e-3;
        r.predicate = ActionPredicate::SelectedActionIn(vec![]);
        assert!(query(&net, &r, Budget::default()).is_err());
        r.predicate = ActionPredicate::SelectedActionIs(3);
        assert!(query(&net, &r, Budget::default()).is_err());
    }

    #[test]
    fn fixed_dims_are_respected() {
        // linear net: Q = [x0, x1]; action 1 selected iff x1 > x0
        let net = Mlp::from_layers(vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0])]).unwrap();
        let mut r = QueryRegion::new(vec![iv(0.0, 1.0)], ActionPredicate::SelectedActionIs(1));
        r.fixed_dims.insert(1, 2.0);
        let v = query(&net, &r, Budget::boxes(10)).unwrap();
        let w = v.witness().unwrap();
        assert_eq!(w[1], 2.0);
        assert!(r.contains(w));
        r.fixed_dims.insert(1, -2.0);
        assert!(query(&net, &r, Budget::boxes(10)).unwrap().is_unsat());
    }

    #[test]
    fn tiny_satisfying_region_needs_refinement() {
        // Q1 - Q0 = x - 0.9; action 1 holds only on (0.9, 1]
        let net = Mlp::from_layers(vec![(vec![0.0, 1.0], vec![0.0, -0.9])]).unwrap();
        let r = QueryRegion::new(vec![iv(0.0, 1.0)], ActionPredicate::SelectedActionIs(1));
        let v = query(&net, &r, Budget::boxes(1000)).unwrap();
        let w = v.witness().expect("sat");
        assert!(w[0] > 0.9);
        assert!(v.stats.boxes > 1);
        // and an empty budget times out
        let v = query(&net, &r, Budget::boxes(0)).unwrap();
        assert_eq!(v.kind, VerdictKind::Timeout);
    }

    #[test]
    fn exact_ties_end_undecided() {
        // Q0 == Q1 everywhere: action 1 never wins, but interval bounds cannot
        // prove that, so refinement bottoms out at delta.
        let net = Mlp::from_layers(vec![(vec![1.0, 1.0], vec![0.0, 0.0])]).unwrap();
        let r = QueryRegion::new(vec![iv(-1.0, 1.0)], ActionPredicate::SelectedActionIs(1));
        let v = query(&net, &r, Budget::boxes(100_000)).unwrap();
        assert_eq!(v.kind, VerdictKind::Timeout);
        assert!(v.stats.undecided > 0);
    }

    #[test]
    fn enumerative_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::random(&[4, 6, 3], &mut rng).unwrap();
        let states: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..4).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        for a in 0..3 {
            let p = ActionPredicate::SelectedActionIs(a);
            let v = query_enumerative(&net, &states, &p).unwrap();
            let first = states.iter().find(|s| net.greedy_action(s).unwrap() == a);
            assert_eq!(v.witness().map(|w| w.to_vec()), first.cloned());
            assert_eq!(v.is_unsat(), first.is_none());
        }
        assert!(query_enumerative(&net, &states, &ActionPredicate::SelectedActionIn(vec![])).is_err());
        assert!(query_enumerative(&net, &[], &ActionPredicate::SelectedActionIs(0)).is_err());
    }

    #[test]
    fn verdict_serializes_flat() {
        let v = OracleVerdict {
            kind: VerdictKind::Sat { witness: vec![0.5] },
            stats: QueryStats::default(),
        };
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"verdict\":\"sat\""));
        let back: OracleVerdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn random_instances_never_contradict_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let net = Mlp::random(&[2, 8, 8, 4], &mut rng).unwrap();
            let lo: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..1.0)).collect();
            let b: Vec<Interval> = lo.iter().map(|&l| iv(l, l + rng.gen_range(0.1..1.0))).collect();
            let a = rng.gen_range(0..4);
            let r = QueryRegion::new(b.clone(), ActionPredicate::SelectedActionIs(a));
            let v = query(&net, &r, Budget::boxes(20_000)).unwrap();
            if let Some(w) = v.witness() {
                assert!(r.contains(w));
                assert_eq!(net.greedy_action(w).unwrap(), a);
            }
            if v.is_unsat() {
                for _ in 0..2000 {
                    let s: Vec<f64> = b.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
                    assert_ne!(net.greedy_action(&s).unwrap(), a);
                }
            }
        }
    }
}
