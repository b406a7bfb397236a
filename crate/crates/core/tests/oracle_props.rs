mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use introspect::nn::{argmax, Interval, Mlp};
use introspect::oracle::{
    build_lander_query_family, partition_defect, query, query_enumerative, ActionPredicate, Budget, LanderGrid,
    Query, QueryFamily, VerdictKind,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdicts_are_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, region) = common::random_query(&mut rng);
        let v = query(&net, &region, Budget::boxes(5_000)).unwrap();
        match &v.kind {
            VerdictKind::Sat { witness } => {
                prop_assert!(region.contains(witness));
                prop_assert!(region.predicate.holds(argmax(&net.forward(witness).unwrap())));
            }
            VerdictKind::Unsat => {
                for _ in 0..2_000 {
                    let x = common::sample_point(&region, &mut rng);
                    prop_assert!(!region.predicate.holds(argmax(&net.forward(&x).unwrap())));
                }
            }
            VerdictKind::Timeout => {}
        }
        prop_assert!(v.stats.boxes <= 5_000);
    }

    #[test]
    fn a_larger_budget_never_flips_a_decided_verdict(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, region) = common::random_query(&mut rng);
        let small = query(&net, &region, Budget::boxes(500)).unwrap();
        let large = query(&net, &region, Budget::boxes(1_000)).unwrap();
        if small.is_unsat() {
            prop_assert!(large.is_unsat());
        }
        if small.is_sat() {
            prop_assert!(!large.is_unsat());
        }
    }

    #[test]
    fn enumerative_queries_find_any_satisfying_state(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::random(&[3, 6, 3], &mut rng).unwrap();
        let states: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let target = rng.gen_range(0..3);
        let pred = ActionPredicate::SelectedActionIs(target);
        let expect = states.iter().any(|s| argmax(&net.forward(s).unwrap()) == target);
        let v = query_enumerative(&net, &states, &pred).unwrap();
        prop_assert_eq!(v.is_sat(), expect);
        prop_assert_eq!(v.is_unsat(), !expect);
        if let Some(w) = v.witness() {
            prop_assert!(states.contains(&w.to_vec()));
        }
    }

    #[test]
    fn lander_grids_partition_their_region(cells in prop::array::uniform6(1usize..4), broad in any::<bool>()) {
        let grid = LanderGrid {
            cells,
            ..if broad { LanderGrid::broad() } else { LanderGrid::default() }
        };
        let family = build_lander_query_family(&grid).unwrap();
        prop_assert_eq!(family.len(), 2 * cells.iter().product::<usize>());
        let boxes: Vec<Vec<Interval>> = family
            .entries
            .iter()
            .map(|e| match &e.query {
                Query::Region(r) => r.state_box.clone(),
                Query::Finite { .. } => unreachable!(),
            })
            .collect();
        let region = grid.region();
        let scale: f64 = region.iter().map(|b| b.iter().map(Interval::width).product::<f64>()).sum();
        prop_assert!(partition_defect(&boxes, &region).is_partition(1e-9 * scale));
        prop_assert!(family.validate(8, 4).is_ok());
    }
}

#[test]
fn families_round_trip_through_json() {
    let mut family = build_lander_query_family(&LanderGrid::default()).unwrap();
    family.injection_action = Some(2);
    let back = QueryFamily::from_json(&family.to_json().unwrap()).unwrap();
    assert_eq!(back, family);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Mlp::random(&[8, 16, 4], &mut rng).unwrap();
    for r in family.evaluate(&net, Budget::boxes(200)) {
        let v = r.unwrap();
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<introspect::oracle::OracleVerdict>(&text).unwrap(), v);
    }
}

#[test]
fn family_validation_rejects_duplicates_and_bad_dimensions() {
    let mut family = build_lander_query_family(&LanderGrid::default()).unwrap();
    assert!(family.validate(7, 4).is_err());
    assert!(family.validate(8, 2).is_err());
    let first = family.entries[0].clone();
    family.entries.push(first);
    assert!(family.validate(8, 4).is_err());
}
