//! Closed real intervals and sound interval propagation through an [`Mlp`].
//!
//! Every floating-point operation on a bound is rounded one ULP outward, so
//! the enclosures stay valid despite round-to-nearest arithmetic. `tanh` is
//! monotone and is evaluated at the endpoints.

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("malformed interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        // guards against overflow/rounding pushing the midpoint outside
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Splits at the midpoint into `[lo, mid]` and `[mid, hi]`.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.midpoint();
        (Interval { lo: self.lo, hi: m }, Interval { lo: m, hi: self.hi })
    }

    fn tanh(&self) -> Interval {
        let lo = self.lo.tanh().next_down().max(-1.0);
        let hi = self.hi.tanh().next_up().min(1.0);
        Interval { lo, hi }
    }
}

/// Lower/upper bound of `w * x` for `x` in `iv`, rounded outward.
#[inline]
fn scaled_bounds(w: f64, iv: &Interval) -> (f64, f64) {
    if w >= 0.0 {
        ((w * iv.lo).next_down(), (w * iv.hi).next_up())
    } else {
        ((w * iv.hi).next_down(), (w * iv.lo).next_up())
    }
}

impl Mlp {
    /// Sound enclosure of `{ forward(s) : s in input_box }`, one interval per action.
    pub fn interval_forward(&self, input_box: &[Interval]) -> Result<Vec<Interval>> {
        if input_box.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input_box.len(),
            });
        }
        if let Some(bad) = input_box.iter().find(|iv| !(iv.lo <= iv.hi)) {
            return Err(Error::invalid(format!(
                "malformed interval [{}, {}]",
                bad.lo, bad.hi
            )));
        }
        Ok(self.interval_forward_unchecked(input_box))
    }

    pub(crate) fn interval_forward_unchecked(&self, input_box: &[Interval]) -> Vec<Interval> {
        let mut current = input_box.to_vec();
        let last = self.n_layers() - 1;
        for k in 0..self.n_layers() {
            let layer = self.layer(k);
            let mut next = Vec::with_capacity(layer.outputs);
            for row in 0..layer.outputs {
                let w = &layer.weights[row * layer.inputs..(row + 1) * layer.inputs];
                let mut lo = layer.bias[row];
                let mut hi = lo;
                for (&wij, iv) in w.iter().zip(&current) {
                    let (a, b) = scaled_bounds(wij, iv);
                    lo = (lo + a).next_down();
                    hi = (hi + b).next_up();
                }
                let iv = Interval { lo, hi };
                next.push(if k == last { iv } else { iv.tanh() });
            }
            current = next;
        }
        current
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_inverted_interval() {
        assert!(Interval::new(1.0, 0.0).is_err());
        let net = Mlp::zeros(&[1, 1]).unwrap();
        let bad = [Interval { lo: 1.0, hi: 0.0 }];
        assert!(net.interval_forward(&bad).is_err());
    }

    #[test]
    fn point_box_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::random(&[5, 32, 32, 4], &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let boxed: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        let q = net.forward(&x).unwrap();
        for (iv, v) in net.interval_forward(&boxed).unwrap().iter().zip(&q) {
            assert!(iv.contains(*v));
            assert!((iv.lo - v).abs() < 1e-12 && (iv.hi - v).abs() < 1e-12);
        }
    }

    #[test]
    fn random_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let net = Mlp::random(&[3, 16, 16, 4], &mut rng).unwrap();
            let bx: Vec<Interval> = (0..3)
                .map(|_| {
                    let a: f64 = rng.gen_range(-2.0..2.0);
                    Interval::new(a, a + rng.gen_range(0.0..1.5)).unwrap()
                })
                .collect();
            let enc = net.interval_forward(&bx).unwrap();
            for _ in 0..1000 {
                let s: Vec<f64> = bx.iter().map(|iv| rng.gen_range(iv.lo..=iv.hi)).collect();
                for (iv, q) in enc.iter().zip(net.forward(&s).unwrap()) {
                    assert!(iv.contains(q), "{q} escaped [{}, {}]", iv.lo, iv.hi);
                }
            }
        }
    }

    #[test]
    fn bisection_is_inclusion_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::random(&[2, 8, 8, 3], &mut rng).unwrap();
        let parent = vec![Interval::new(-1.0, 1.0).unwrap(), Interval::new(0.0, 0.5).unwrap()];
        let (l, r) = parent[0].bisect();
        let left = vec![l, parent[1]];
        let right = vec![r, parent[1]];
        let p = net.interval_forward(&parent).unwrap();
        let a = net.interval_forward(&left).unwrap();
        let b = net.interval_forward(&right).unwrap();
        for i in 0..3 {
            assert!(a[i].hull(&b[i]).is_subset_of(&p[i]));
        }
    }

    #[test]
    fn enclosure_shrinks_under_nested_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Mlp::random(&[2, 8, 8, 2], &mut rng).unwrap();
        let mut bx = vec![Interval::new(-1.0, 1.0).unwrap(); 2];
        let mut last = f64::INFINITY;
        for step in 0..40 {
            let w: f64 = net
                .interval_forward(&bx)
                .unwrap()
                .iter()
                .map(Interval::width)
                .fold(0.0, f64::max);
            assert!(w <= last + 1e-15);
            last = w;
            let d = step % 2;
            bx[d] = bx[d].bisect().0;
        }
        assert!(last < 1e-4);
    }
}
