/// Binary sum tree over a fixed number of leaves.
///
/// Node 1 is the root and leaf `i` lives at `leaves + i`. Updates recompute
/// each ancestor from its two children instead of adding deltas, so partial
/// sums never accumulate drift.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(value >= 0.0 && value.is_finite());
        let mut node = self.leaves + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`, with `0 <= mass < total`.
    /// Never returns a zero-priority leaf while any positive leaf exists.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            let right = left + 1;
            if mass < self.nodes[left] || self.nodes[right] == 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = right;
            }
        }
        node - self.leaves
    }

    /// Largest violation of "node = left + right" over internal nodes.
    pub fn max_inconsistency(&self) -> f64 {
        (1..self.leaves)
            .map(|n| (self.nodes[n] - self.nodes[2 * n] - self.nodes[2 * n + 1]).abs())
            .fold(0.0, f64::max)
    }
}
