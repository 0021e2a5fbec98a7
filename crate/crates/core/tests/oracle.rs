mod common;

use common::{brute_force, oracle_agrees, solution_set};
use inclusion_core::fixtures::{generate, FixtureSpec, Shape};
use inclusion_core::{partition, Algorithm, SolverOptions};
use proptest::prelude::*;

#[test]
fn exhaustive_search_matches_enumeration() {
    for seed in 0..120 {
        oracle_agrees(seed, Algorithm::Exhaustive, None).unwrap();
    }
}

#[test]
fn meet_in_the_middle_matches_enumeration() {
    for seed in 0..120 {
        oracle_agrees(seed, Algorithm::MeetInMiddle, None).unwrap();
    }
}

#[test]
fn single_thread_matches_enumeration() {
    for seed in 0..30 {
        oracle_agrees(seed, Algorithm::Auto, Some(1)).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fractional_values_match_enumeration(
        seed in any::<u64>(),
        rows in 4usize..11,
        periods in 1usize..4,
        three_way in any::<bool>(),
    ) {
        let spec = FixtureSpec {
            seed,
            rows,
            periods,
            magnitude: 40,
            value_scale: 0.25,
            shape: if three_way { Shape::ThreeWay } else { Shape::TwoWay },
            ..Default::default()
        };
        let fx = generate(&spec).unwrap();
        let opts = SolverOptions { max_solutions: 1 << 20, ..SolverOptions::with_tolerance(spec.tolerance) };
        let parts = partition(&fx.statement, &fx.target, &opts).unwrap();
        let expected = brute_force(&fx.statement, &fx.target, spec.tolerance, false);
        prop_assert_eq!(solution_set(&fx.statement, &parts), expected);
    }
}
