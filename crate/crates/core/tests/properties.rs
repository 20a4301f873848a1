use lll_core::corollaries::scan_forbidden;
use lll_core::engine::{replay, run_finite, RunStatus};
use lll_core::explore::{avoiding_mass, explore, ExploreBudget};
use lll_core::fireworks::{cantor_pair, cantor_unpair, take_time_sequential, take_time_uniform};
use lll_core::model::{avoid_bound, check_finite_lll};
use lll_core::rational::{self, q};
use lll_core::witness::{trees_for_events, validate_tree, WitnessTree};
use lll_core::{ConstraintSystem, LllParams, Rational, Tape};
use num_traits::One;
use proptest::prelude::*;

fn clause_strategy(num_vars: usize) -> impl Strategy<Value = Vec<(usize, bool)>> {
    proptest::sample::subsequence((0..num_vars).collect::<Vec<_>>(), 1..=3)
        .prop_flat_map(|vars| {
            let n = vars.len();
            (Just(vars), proptest::collection::vec(any::<bool>(), n))
        })
        .prop_map(|(vars, signs)| vars.into_iter().zip(signs).collect())
}

fn small_cnf() -> impl Strategy<Value = ConstraintSystem> {
    proptest::collection::vec(clause_strategy(4), 1..=3)
        .prop_map(|clauses| ConstraintSystem::from_clauses(4, &clauses).unwrap())
}

/// Any window of length at least `min_len` equal to a forbidden string.
fn naive_scan(bits: &str, forbidden: &[String], min_len: usize) -> bool {
    forbidden.iter().filter(|f| f.len() >= min_len).any(|f| bits.contains(f.as_str()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_end_satisfied_and_replay(system in small_cnf(), seed in any::<u64>()) {
        let run = run_finite(&system, &mut Tape::seeded(seed), 10_000).unwrap();
        if run.status == RunStatus::Satisfied {
            prop_assert!(system.violated(&run.assignment).is_empty());
        }
        let replayed = replay(&run.log, &system, |_, _| {}).unwrap();
        prop_assert_eq!(replayed, run.assignment);
    }

    #[test]
    fn witness_trees_are_valid_and_distinct(system in small_cnf(), seed in any::<u64>()) {
        let run = run_finite(&system, &mut Tape::seeded(seed), 200).unwrap();
        let events = run.log.events();
        let trees = trees_for_events(&events, &system).unwrap();
        prop_assert_eq!(trees.len(), events.len());
        for (k, t) in trees.iter().enumerate() {
            prop_assert_eq!(t.root_label(), events[k]);
            prop_assert!(t.size() <= k + 1);
            prop_assert!(validate_tree(t, &system).valid());
            prop_assert_eq!(WitnessTree::parse_canonical(&t.canonical()).unwrap().canonical(), t.canonical());
        }
        let mut canon: Vec<String> = trees.iter().map(|t| t.canonical()).collect();
        canon.sort();
        canon.dedup();
        prop_assert_eq!(canon.len(), trees.len());
    }

    #[test]
    fn exploration_mass_sums_to_one(system in small_cnf(), bits in 4usize..10) {
        let ex = explore(&system, ExploreBudget { max_bits: bits, ..Default::default() }).unwrap();
        let total: Rational = ex.leaves.iter().map(|l| l.weight()).sum();
        prop_assert!(total.is_one());
        prop_assert_eq!(ex.resolved_mass() + ex.unresolved_mass(), Rational::one());
    }

    #[test]
    fn lemma_bound_on_avoiding_mass(system in small_cnf(), zi in 1i64..=4) {
        let z = q(1, zi + 1);
        let params = LllParams::uniform(system.num_events(), z, q(1, 1)).unwrap();
        if check_finite_lll(&system, &params).unwrap().holds() {
            prop_assert!(avoiding_mass(&system, 1 << 12).unwrap() >= avoid_bound(&params));
        }
    }

    #[test]
    fn scan_matches_naive(
        bits in proptest::collection::vec(0u32..2, 0..200),
        forbidden in proptest::collection::vec("[01]{1,8}", 0..6),
        min_len in 1usize..6,
    ) {
        let text: String = bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
        match scan_forbidden(&bits, &forbidden, min_len) {
            Some((pos, s)) => {
                prop_assert!(s.len() >= min_len && forbidden.contains(&s));
                prop_assert_eq!(&text[pos..pos + s.len()], s.as_str());
            }
            None => prop_assert!(!naive_scan(&text, &forbidden, min_len)),
        }
    }

    #[test]
    fn cantor_round_trip(i in 0u64..1 << 20, j in 0u64..1 << 20) {
        prop_assert_eq!(cantor_unpair(cantor_pair(i, j)), (i, j));
    }

    #[test]
    fn rational_text_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
        let r = q(n, d);
        prop_assert_eq!(rational::parse(&rational::fmt(&r)).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn take_time_strategies_agree(n in 1u64..400) {
        prop_assert_eq!(take_time_uniform(n), take_time_sequential(n));
    }
}
