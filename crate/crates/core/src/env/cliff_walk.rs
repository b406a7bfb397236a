use super::{check_action, one_hot, Environment, Gridworld, StepResult, DOWN, LEFT, RIGHT, UP};
use crate::error::{Error, Result};
use crate::mdp::{BadSet, MdpBuilder, TabularMdp};

pub const ROWS: usize = 4;
pub const COLS: usize = 12;
pub const STEP_CAP: usize = 200;
pub const STEP_REWARD: f64 = -1.0;
pub const CLIFF_REWARD: f64 = -100.0;

/// 4 x 12 cliff walk. Start bottom-left, goal bottom-right, cliff in between.
///
/// Every move costs -1, including the move into the goal. Stepping into the
/// cliff yields -100 and ends the episode. Moves into the border leave the
/// agent in place.
#[derive(Clone, Debug)]
pub struct CliffWalk {
    position: usize,
    steps: usize,
    done: bool,
}

impl Default for CliffWalk {
    fn default() -> Self {
        Self::new()
    }
}

pub const fn cell(row: usize, col: usize) -> usize {
    row * COLS + col
}

pub const START: usize = cell(ROWS - 1, 0);
pub const GOAL: usize = cell(ROWS - 1, COLS - 1);

pub fn is_cliff(c: usize) -> bool {
    c / COLS == ROWS - 1 && c % COLS != 0 && c % COLS != COLS - 1
}

/// Deterministic dynamics: `(next cell, reward, terminal)`.
pub fn transition(c: usize, action: usize) -> (usize, f64, bool) {
    let (row, col) = (c / COLS, c % COLS);
    let (row, col) = match action {
        UP => (row.saturating_sub(1), col),
        DOWN => ((row + 1).min(ROWS - 1), col),
        LEFT => (row, col.saturating_sub(1)),
        RIGHT => (row, (col + 1).min(COLS - 1)),
        _ => unreachable!("validated by caller"),
    };
    let next = cell(row, col);
    if is_cliff(next) {
        (next, CLIFF_REWARD, true)
    } else if next == GOAL {
        (next, 0.0, true)
    } else {
        (next, STEP_REWARD, false)
    }
}

impl CliffWalk {
    pub fn new() -> Self {
        Self {
            position: START,
            steps: 0,
            done: false,
        }
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

impl Environment for CliffWalk {
    fn observation_dim(&self) -> usize {
        ROWS * COLS
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        *self = Self::new();
        one_hot(ROWS * COLS, START)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        check_action(action, 4)?;
        let (next, reward, terminal) = transition(self.position, action);
        self.position = next;
        self.steps += 1;
        let truncated = !terminal && self.steps >= STEP_CAP;
        self.done = terminal || truncated;
        Ok(StepResult {
            observation: one_hot(ROWS * COLS, next),
            reward,
            terminal,
            truncated,
        })
    }

    fn solve_threshold(&self) -> f64 {
        -30.0
    }
}

impl Gridworld for CliffWalk {
    fn n_states(&self) -> usize {
        ROWS * COLS
    }

    fn encode(&self, state: usize) -> Vec<f64> {
        one_hot(ROWS * COLS, state)
    }

    fn decode(&self, observation: &[f64]) -> Option<usize> {
        decode_one_hot(observation)
    }

    fn to_tabular(&self, gamma: f64) -> Result<(TabularMdp, BadSet)> {
        let n = ROWS * COLS;
        let mut b = MdpBuilder::new(n, 4, gamma);
        let mut bad = Vec::new();
        for c in 0..n {
            for a in 0..4 {
                if is_cliff(c) || c == GOAL {
                    // never occupied: absorb immediately
                    b.terminal(c, a);
                    continue;
                }
                let (next, reward, terminal) = transition(c, a);
                b.reward(c, a, reward);
                if terminal {
                    b.terminal(c, a);
                } else {
                    b.deterministic(c, a, next);
                }
                if is_cliff(next) {
                    bad.push((c, a));
                }
            }
        }
        Ok((b.build()?, BadSet::new(bad)))
    }
}

pub(crate) fn decode_one_hot(observation: &[f64]) -> Option<usize> {
    let mut hot = None;
    for (i, &v) in observation.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return None;
            }
            hot = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::value_iteration;

    /// Independent cliff-walk rules written from the textbook description.
    fn textbook_step(row: i32, col: i32, action: usize) -> ((i32, i32), f64, bool) {
        let (dr, dc) = [(-1, 0), (1, 0), (0, -1), (0, 1)][action];
        let nr = (row + dr).clamp(0, 3);
        let nc = (col + dc).clamp(0, 11);
        if nr == 3 && (1..=10).contains(&nc) {
            ((nr, nc), -100.0, true)
        } else if (nr, nc) == (3, 11) {
            ((nr, nc), 0.0, true)
        } else {
            ((nr, nc), -1.0, false)
        }
    }

    #[test]
    fn reset_starts_bottom_left() {
        let mut e = CliffWalk::new();
        let obs = e.reset(123);
        assert_eq!(decode_one_hot(&obs), Some(36));
        assert_eq!(obs.len(), 48);
    }

    #[test]
    fn stepping_into_cliff() {
        let mut e = CliffWalk::new();
        e.reset(0);
        e.step(UP).unwrap();
        e.step(RIGHT).unwrap();
        let r = e.step(DOWN).unwrap();
        assert_eq!(r.reward, -100.0);
        assert!(r.terminal);
        assert!(matches!(e.step(UP), Err(Error::EpisodeOver)));
    }

    #[test]
    fn wall_bump_keeps_position() {
        let mut e = CliffWalk::new();
        e.reset(0);
        let r = e.step(LEFT).unwrap();
        assert_eq!(r.reward, -1.0);
        assert_eq!(e.position(), START);
        let r = e.step(DOWN).unwrap();
        assert_eq!((r.reward, r.terminal), (-1.0, false));
        assert_eq!(e.position(), START);
    }

    #[test]
    fn matches_textbook_rules_everywhere() {
        for row in 0..4 {
            for col in 0..12 {
                let c = cell(row as usize, col as usize);
                if is_cliff(c) || c == GOAL {
                    continue;
                }
                for a in 0..4 {
                    let (next, r, t) = transition(c, a);
                    let ((nr, nc), r2, t2) = textbook_step(row, col, a);
                    assert_eq!(next, cell(nr as usize, nc as usize));
                    assert_eq!((r, t), (r2, t2));
                }
            }
        }
    }

    #[test]
    fn step_cap_truncates() {
        let mut e = CliffWalk::new();
        e.reset(0);
        for k in 0..STEP_CAP {
            let r = e.step(UP).unwrap();
            assert_eq!(r.truncated, k + 1 == STEP_CAP);
            assert!(!r.terminal);
        }
        assert!(e.step(UP).is_err());
    }

    #[test]
    fn tabular_shape_and_bad_set() {
        let (m, bad) = CliffWalk::new().to_tabular(0.99).unwrap();
        assert_eq!(m.n_states(), 49);
        assert!(m.is_deterministic());
        // ten cells above the cliff moving down, plus the start moving right
        assert_eq!(bad.pairs.len(), 11);
        assert!(bad.contains(START, RIGHT));
        for col in 1..=10 {
            assert!(bad.contains(cell(2, col), DOWN));
        }
    }

    #[test]
    fn optimal_path_hugs_the_cliff() {
        let (m, _) = CliffWalk::new().to_tabular(1.0).unwrap();
        let vi = value_iteration(&m).unwrap();
        // 13 moves, the last one into the goal unrewarded
        assert_eq!(vi.values[START], -12.0);
        // follow the greedy policy from the start
        let mut c = START;
        let mut path = 0;
        while c != GOAL {
            let row = vi.q.row(c);
            let a = crate::nn::argmax(row);
            let (next, _, _) = transition(c, a);
            assert!(!is_cliff(next));
            c = next;
            path += 1;
            assert!(path <= 13);
        }
        assert_eq!(path, 13);
        // shortest-path oracle: BFS over the free cells
        let mut dist = vec![usize::MAX; 48];
        dist[START] = 0;
        let mut queue = std::collections::VecDeque::from([START]);
        while let Some(c) = queue.pop_front() {
            for a in 0..4 {
                let (n, _, _) = transition(c, a);
                if !is_cliff(n) && dist[n] == usize::MAX {
                    dist[n] = dist[c] + 1;
                    if n != GOAL {
                        queue.push_back(n);
                    }
                }
            }
        }
        assert_eq!(dist[GOAL], 13);
    }
}
