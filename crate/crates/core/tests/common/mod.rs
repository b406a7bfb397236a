#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;

use introspect::mdp::{all_policies, q_values, TabularMdp};
use introspect::nn::{Interval, Mlp};
use introspect::oracle::{ActionPredicate, QueryRegion};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn random_dims<R: Rng + ?Sized>(rng: &mut R) -> Vec<usize> {
    let mut dims = vec![rng.gen_range(1..=6)];
    for _ in 0..rng.gen_range(1..=2) {
        dims.push(rng.gen_range(1..=12));
    }
    dims.push(rng.gen_range(2..=4));
    dims
}

pub fn loss(net: &Mlp, state: &[f64], action: usize, target: f64, weight: f64) -> f64 {
    let q = net.forward(state).unwrap()[action];
    0.5 * weight * (q - target) * (q - target)
}

/// Largest relative disagreement between the analytic gradient and a central
/// difference with step `h`. Magnitudes below `floor` are compared absolutely.
pub fn gradient_error(net: &Mlp, state: &[f64], action: usize, target: f64, weight: f64, h: f64, floor: f64) -> f64 {
    let analytic = net.gradient(state, action, target, weight).unwrap().values;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..net.n_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = loss(&probe, state, action, target, weight);
        probe.params_mut()[i] = orig - h;
        let down = loss(&probe, state, action, target, weight);
        probe.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let g = analytic[i];
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(floor));
    }
    worst
}

/// Pessimal action values by brute force: the minimum over every deterministic policy.
pub fn pessimal_by_enumeration(mdp: &TabularMdp) -> Vec<Vec<f64>> {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut best = vec![vec![f64::INFINITY; na]; n];
    for policy in all_policies(mdp).unwrap() {
        let q = q_values(mdp, &policy).unwrap();
        for (s, row) in best.iter_mut().enumerate() {
            for (a, v) in row.iter_mut().enumerate() {
                *v = v.min(q.get(s, a));
            }
        }
    }
    best
}

/// A random network together with a random query region over its inputs.
pub fn random_query<R: Rng + ?Sized>(rng: &mut R) -> (Mlp, QueryRegion) {
    let dims = random_dims(rng);
    let net = Mlp::random(&dims, rng).unwrap();
    let d = dims[0];
    let n_actions = *dims.last().unwrap();
    let n_fixed = if d >= 2 && rng.gen_bool(0.3) { 1 } else { 0 };
    let state_box = (0..d - n_fixed)
        .map(|_| {
            let c: f64 = rng.gen_range(-1.0..1.0);
            let w: f64 = 10f64.powf(rng.gen_range(-2.0..0.3));
            Interval::new(c - w / 2.0, c + w / 2.0).unwrap()
        })
        .collect();
    let predicate = if rng.gen_bool(0.5) {
        ActionPredicate::SelectedActionIs(rng.gen_range(0..n_actions))
    } else {
        let mut set: Vec<usize> = (0..n_actions).filter(|_| rng.gen_bool(0.4)).collect();
        if set.is_empty() || set.len() == n_actions {
            set = vec![rng.gen_range(0..n_actions)];
        }
        ActionPredicate::SelectedActionIn(set)
    };
    let mut region = QueryRegion::new(state_box, predicate);
    if n_fixed == 1 {
        region.fixed_dims.insert(rng.gen_range(0..d), rng.gen_range(-1.0..1.0));
    }
    (net, region)
}

/// Uniform point in the region (fixed dimensions at their values).
pub fn sample_point<R: Rng + ?Sized>(region: &QueryRegion, rng: &mut R) -> Vec<f64> {
    let mut free = region.state_box.iter();
    (0..region.input_dim())
        .map(|d| match region.fixed_dims.get(&d) {
            Some(&v) => v,
            None => {
                let iv = free.next().unwrap();
                if iv.width() > 0.0 {
                    rng.gen_range(iv.lo..=iv.hi)
                } else {
                    iv.lo
                }
            }
        })
        .collect()
}
