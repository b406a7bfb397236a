use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{query, query_enumerative, ActionPredicate, Budget, OracleVerdict, QueryRegion};
use crate::env::Gridworld;
use crate::error::{Error, Result};
use crate::nn::{argmax, Interval, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query {
    Region(QueryRegion),
    /// Explicit finite state list, checked exhaustively.
    Finite {
        states: Vec<Vec<f64>>,
        predicate: ActionPredicate,
    },
}

impl Query {
    pub fn predicate(&self) -> &ActionPredicate {
        match self {
            Query::Region(r) => &r.predicate,
            Query::Finite { predicate, .. } => predicate,
        }
    }

    pub fn evaluate(&self, net: &Mlp, budget: Budget) -> Result<OracleVerdict> {
        match self {
            Query::Region(r) => query(net, r, budget),
            Query::Finite { states, predicate } => query_enumerative(net, states, predicate),
        }
    }

    fn validate(&self, input_dim: usize, n_actions: usize) -> Result<()> {
        match self {
            Query::Region(r) => {
                if r.input_dim() != input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: input_dim,
                        actual: r.input_dim(),
                    });
                }
                if !(r.delta > 0.0) {
                    return Err(Error::invalid("delta must be positive"));
                }
                r.predicate.validate(n_actions)
            }
            Query::Finite { states, predicate } => {
                if states.is_empty() {
                    return Err(Error::invalid("finite query without states"));
                }
                if let Some(s) = states.iter().find(|s| s.len() != input_dim) {
                    return Err(Error::DimensionMismatch {
                        expected: input_dim,
                        actual: s.len(),
                    });
                }
                predicate.validate(n_actions)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub label: String,
    pub query: Query,
}

fn default_injection_reward() -> f64 {
    -100.0
}

/// Ordered, uniquely labelled set of oracle queries plus the reward given to
/// injected examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryFamily {
    pub entries: Vec<FamilyEntry>,
    #[serde(default = "default_injection_reward")]
    pub injection_reward: f64,
    /// Action recorded for injected examples. `None` uses the action the
    /// network selects at the witness.
    #[serde(default)]
    pub injection_action: Option<usize>,
}

impl Default for QueryFamily {
    fn default() -> Self {
        Self::empty()
    }
}

impl QueryFamily {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            injection_reward: default_injection_reward(),
            injection_action: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn validate(&self, input_dim: usize, n_actions: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::invalid(format!("duplicate query label `{}`", e.label)));
            }
            e.query.validate(input_dim, n_actions)?;
        }
        if !self.injection_reward.is_finite() {
            return Err(Error::invalid("injection reward must be finite"));
        }
        if let Some(a) = self.injection_action {
            if a >= n_actions {
                return Err(Error::invalid(format!("injection action {a} out of range")));
            }
        }
        Ok(())
    }

    /// Evaluates every query against one weight snapshot, in entry order.
    pub fn evaluate(&self, net: &Mlp, budget: Budget) -> Vec<Result<OracleVerdict>> {
        self.entries
            .par_iter()
            .map(|e| e.query.evaluate(net, budget))
            .collect()
    }

    /// Action stored with an injected example at `witness`.
    pub fn injection_action_for(&self, net: &Mlp, witness: &[f64]) -> usize {
        self.injection_action
            .unwrap_or_else(|| argmax(&net.forward_unchecked(witness)))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// One single-state enumerative query per bad pair of a gridworld.
    pub fn for_gridworld(env: &dyn Gridworld, gamma: f64) -> Result<Self> {
        let (_, bad) = env.to_tabular(gamma)?;
        let entries = bad
            .pairs
            .iter()
            .map(|&(s, a)| FamilyEntry {
                label: format!("s{s}_a{a}"),
                query: Query::Finite {
                    states: vec![env.encode(s)],
                    predicate: ActionPredicate::SelectedActionIs(a),
                },
            })
            .collect();
        Ok(Self {
            entries,
            ..Self::empty()
        })
    }
}

/// Quantization of the lander state space into query boxes.
///
/// Dimension order is `x, y, vx, vy, angle, omega`; the two leg flags are
/// fixed to 0. The x range is split at the pad edges and only the parts
/// outside the pad are kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanderGrid {
    pub bounds: [[f64; 2]; 6],
    /// Cells per dimension; for x this is the count on each side of the pad.
    pub cells: [usize; 6],
    pub pad_half_width: f64,
    /// Away-moving action for states left of the pad (pushes toward -x).
    pub left_action: usize,
    /// Away-moving action for states right of the pad (pushes toward +x).
    pub right_action: usize,
    pub delta: f64,
    pub injection_reward: f64,
}

impl Default for LanderGrid {
    fn default() -> Self {
        Self {
            bounds: [
                [-1.0, 1.0],
                [0.5, 1.5],
                [-0.5, 0.5],
                [-0.5, 0.0],
                [-0.2, 0.2],
                [-0.2, 0.2],
            ],
            cells: [2, 2, 2, 1, 1, 1],
            pad_half_width: 0.25,
            left_action: 3,
            right_action: 1,
            delta: 1e-3,
            injection_reward: -100.0,
        }
    }
}

impl LanderGrid {
    /// Wider ranges over the same predicates, used to test generalization.
    pub fn broad() -> Self {
        Self {
            bounds: [
                [-1.5, 1.5],
                [0.0, 2.5],
                [-1.5, 1.5],
                [-1.5, 0.5],
                [-0.6, 0.6],
                [-0.6, 0.6],
            ],
            ..Self::default()
        }
    }

    /// The part of state space the grid is meant to cover, as boxes.
    pub fn region(&self) -> Vec<Vec<Interval>> {
        self.sides()
            .into_iter()
            .map(|(x, _, _)| {
                let mut b = vec![x];
                b.extend(self.bounds[1..].iter().map(|r| Interval { lo: r[0], hi: r[1] }));
                b
            })
            .collect()
    }

    fn sides(&self) -> Vec<(Interval, usize, &'static str)> {
        let [xlo, xhi] = self.bounds[0];
        let mut out = Vec::new();
        let left_hi = xhi.min(-self.pad_half_width);
        if xlo < left_hi {
            out.push((Interval { lo: xlo, hi: left_hi }, self.left_action, "left"));
        }
        let right_lo = xlo.max(self.pad_half_width);
        if right_lo < xhi {
            out.push((Interval { lo: right_lo, hi: xhi }, self.right_action, "right"));
        }
        out
    }
}

fn split(iv: Interval, n: usize) -> Vec<Interval> {
    let w = iv.width();
    (0..n)
        .map(|k| Interval {
            lo: if k == 0 { iv.lo } else { iv.lo + w * k as f64 / n as f64 },
            hi: if k + 1 == n { iv.hi } else { iv.lo + w * (k + 1) as f64 / n as f64 },
        })
        .collect()
}

pub fn build_lander_query_family(grid: &LanderGrid) -> Result<QueryFamily> {
    if grid.cells.iter().any(|&c| c == 0) {
        return Err(Error::invalid("lander grid needs at least one cell per dimension"));
    }
    if grid.bounds.iter().any(|r| !(r[0] < r[1])) {
        return Err(Error::invalid("lander grid bounds must satisfy lo < hi"));
    }
    let mut entries = Vec::new();
    for (x_range, action, side) in grid.sides() {
        let mut axes = vec![split(x_range, grid.cells[0])];
        for d in 1..6 {
            let r = grid.bounds[d];
            axes.push(split(Interval { lo: r[0], hi: r[1] }, grid.cells[d]));
        }
        let total: usize = axes.iter().map(Vec::len).product();
        for flat in 0..total {
            let mut rem = flat;
            let mut idx = [0usize; 6];
            for d in (0..6).rev() {
                idx[d] = rem % axes[d].len();
                rem /= axes[d].len();
            }
            let state_box: Vec<Interval> = (0..6).map(|d| axes[d][idx[d]]).collect();
            let fixed_dims = BTreeMap::from([(6, 0.0), (7, 0.0)]);
            let label = format!(
                "{side}_{}",
                idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("")
            );
            entries.push(FamilyEntry {
                label,
                query: Query::Region(QueryRegion {
                    state_box,
                    fixed_dims,
                    predicate: ActionPredicate::SelectedActionIs(action),
                    delta: grid.delta,
                }),
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::invalid("lander grid has no cells outside the pad"));
    }
    Ok(QueryFamily {
        entries,
        injection_reward: grid.injection_reward,
        injection_action: None,
    })
}

fn volume(b: &[Interval]) -> f64 {
    b.iter().map(Interval::width).product()
}

fn intersection(a: &[Interval], b: &[Interval]) -> Option<Vec<Interval>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let lo = x.lo.max(y.lo);
            let hi = x.hi.min(y.hi);
            (lo <= hi).then_some(Interval { lo, hi })
        })
        .collect()
}

/// How far `boxes` is from partitioning `region` (a union of disjoint boxes):
/// total pairwise overlap volume, the uncovered volume, and the number of
/// boxes not contained in any region part. All zero for a partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionDefect {
    pub overlap: f64,
    pub uncovered: f64,
    pub outside: usize,
}

impl PartitionDefect {
    pub fn is_partition(&self, tolerance: f64) -> bool {
        self.overlap <= tolerance && self.uncovered.abs() <= tolerance && self.outside == 0
    }
}

pub fn partition_defect(boxes: &[Vec<Interval>], region: &[Vec<Interval>]) -> PartitionDefect {
    let mut overlap = 0.0;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if let Some(x) = intersection(&boxes[i], &boxes[j]) {
                overlap += volume(&x);
            }
        }
    }
    let outside = boxes
        .iter()
        .filter(|b| {
            !region
                .iter()
                .any(|r| b.iter().zip(r).all(|(x, y)| x.is_subset_of(y)))
        })
        .count();
    let covered: f64 = boxes.iter().map(|b| volume(b)).sum();
    let target: f64 = region.iter().map(|r| volume(r)).sum();
    PartitionDefect {
        overlap,
        uncovered: target - covered + overlap,
        outside,
    }
}
