use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use introspect::replay::{PerConfig, PrioritizedBuffer, SumTree, Transition};

fn item(k: usize) -> Transition {
    Transition::injected(vec![k as f64], 0, -(k as f64))
}

fn config(capacity: usize) -> PerConfig {
    PerConfig {
        capacity,
        ..PerConfig::default()
    }
}

proptest! {
    #[test]
    fn sum_tree_tracks_naive_sums(
        capacity in 1usize..70,
        ops in prop::collection::vec((0usize..70, 0u32..500), 1..200),
    ) {
        let mut tree = SumTree::new(capacity);
        let mut naive = vec![0.0f64; capacity];
        for (i, v) in ops {
            let i = i % capacity;
            tree.set(i, v as f64);
            naive[i] = v as f64;
            prop_assert_eq!(tree.total(), naive.iter().sum::<f64>());
            prop_assert_eq!(tree.max_inconsistency(), 0.0);
        }
        let total = tree.total();
        if total > 0.0 {
            let mut acc = 0.0;
            for (i, &p) in naive.iter().enumerate() {
                if p > 0.0 {
                    prop_assert_eq!(tree.find(acc), i);
                    prop_assert_eq!(tree.find(acc + p * 0.5), i);
                }
                acc += p;
            }
        }
    }

    #[test]
    fn buffer_is_a_fifo_of_its_capacity(capacity in 1usize..40, pushes in 1usize..120) {
        let mut buf = PrioritizedBuffer::new(config(capacity)).unwrap();
        for k in 0..pushes {
            buf.push(item(k));
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        let mut held: Vec<usize> = buf.iter().map(|t| t.state[0] as usize).collect();
        held.sort_unstable();
        let expect: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(held, expect);
    }

    #[test]
    fn samples_and_weights_are_well_formed(
        seed in any::<u64>(),
        n in 1usize..50,
        batch in 1usize..80,
        errors in prop::collection::vec(0.0f64..20.0, 50),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = PrioritizedBuffer::new(config(64)).unwrap();
        let ids: Vec<_> = (0..n).map(|k| buf.push(item(k))).collect();
        buf.update_priorities(&ids, &errors[..n]).unwrap();
        let cfg = *buf.config();
        for (id, e) in ids.iter().zip(&errors) {
            let p = buf.priority(id.slot);
            prop_assert!((p - (e.abs() + cfg.epsilon).powf(cfg.alpha)).abs() <= 1e-12 * p);
        }
        let s = buf.sample(batch, cfg.beta, &mut rng).unwrap();
        prop_assert_eq!(s.transitions.len(), batch);
        let max = s.weights.iter().cloned().fold(0.0, f64::max);
        prop_assert!((max - 1.0).abs() < 1e-12);
        for (w, idx) in s.weights.iter().zip(&s.indices) {
            prop_assert!(*w > 0.0 && *w <= 1.0 + 1e-12);
            prop_assert!(idx.slot < n);
            prop_assert!(buf.priority(idx.slot) > 0.0);
        }
    }

    #[test]
    fn stale_updates_never_touch_new_occupants(capacity in 1usize..16, extra in 1usize..16) {
        let mut buf = PrioritizedBuffer::new(config(capacity)).unwrap();
        let old: Vec<_> = (0..capacity).map(|k| buf.push(item(k))).collect();
        for k in 0..extra {
            buf.push(item(capacity + k));
        }
        let before: Vec<f64> = (0..capacity).map(|s| buf.priority(s)).collect();
        let overwritten = extra.min(capacity);
        buf.update_priorities(&old, &vec![100.0; capacity]).unwrap();
        prop_assert_eq!(buf.stale_updates(), overwritten as u64);
        for (slot, id) in old.iter().enumerate() {
            let replaced = (0..extra).any(|k| k % capacity == slot);
            if replaced {
                prop_assert_eq!(buf.priority(id.slot), before[slot]);
            } else {
                prop_assert!(buf.priority(id.slot) > before[slot]);
            }
        }
    }
}

#[test]
fn sampling_frequency_follows_priorities() {
    // priorities 1 : 2 : 5 through alpha = 1 and a zero floor stand-in
    let cfg = PerConfig {
        alpha: 1.0,
        epsilon: 1e-9,
        ..config(8)
    };
    let mut buf = PrioritizedBuffer::new(cfg).unwrap();
    let ids: Vec<_> = (0..3).map(|k| buf.push(item(k))).collect();
    buf.update_priorities(&ids, &[1.0, 2.0, 5.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = [0f64; 3];
    let draws = 80_000;
    for _ in 0..draws {
        hits[buf.sample(1, 0.6, &mut rng).unwrap().indices[0].slot] += 1.0;
    }
    for (h, p) in hits.iter().zip([1.0, 2.0, 5.0]) {
        let expect = p / 8.0;
        assert!((h / draws as f64 - expect).abs() < 0.01, "{h} vs {expect}");
    }
}
