//! Small systems used by the exhaustive checks, the self test and the
//! examples. Every toy system has at most three events over at most four
//! variables and comes with weights satisfying the strengthened condition
//! (or the plain one where `alpha` is 1).

use crate::model::{ConstraintSystem, Event, LllParams, VariableSpec};
use crate::rational::{one, q};

#[derive(Clone, Debug)]
pub struct ToySystem {
    pub name: &'static str,
    pub system: ConstraintSystem,
    pub params: LllParams,
}

/// One uniform bit, one event forbidding the value 1.
pub fn single_bit() -> ConstraintSystem {
    ConstraintSystem::new(vec![VariableSpec::bit(0)], vec![Event::new(0, vec![0], vec![vec![1]]).unwrap()])
        .expect("valid system")
}

/// Four events where only (0,1) and (1,2) share variables.
pub fn four_event_chain() -> ConstraintSystem {
    let vars = (0..5).map(VariableSpec::bit).collect();
    let events = vec![
        Event::new(0, vec![0], vec![vec![1]]).unwrap(),
        Event::new(1, vec![0, 1], vec![vec![1, 1]]).unwrap(),
        Event::new(2, vec![1, 2], vec![vec![1, 1]]).unwrap(),
        Event::new(3, vec![4], vec![vec![1]]).unwrap(),
    ];
    ConstraintSystem::new(vars, events).expect("valid system")
}

/// A clause over three uniform bits, plus its two neighbors of the same
/// shape, each neighbor sharing a variable.
pub fn three_clause_triangle() -> ConstraintSystem {
    ConstraintSystem::from_clauses(
        4,
        &[
            vec![(0, true), (1, true), (2, true)],
            vec![(1, false), (2, true), (3, true)],
            vec![(0, true), (2, false), (3, false)],
        ],
    )
    .expect("valid system")
}

pub fn toy_corpus() -> Vec<ToySystem> {
    let skew = || VariableSpec::new(0, vec![q(3, 4), q(1, 4)]).unwrap();
    let mut skew1 = skew();
    skew1.index = 1;
    vec![
        ToySystem { name: "single-bit", system: single_bit(), params: LllParams::new(vec![q(3, 4)], q(2, 3)).unwrap() },
        ToySystem {
            name: "shared-pair",
            system: ConstraintSystem::from_clauses(3, &[vec![(0, false), (1, false)], vec![(1, false), (2, false)]])
                .unwrap(),
            params: LllParams::uniform(2, q(1, 2), one()).unwrap(),
        },
        ToySystem {
            name: "clause-triangle",
            system: three_clause_triangle(),
            params: LllParams::uniform(3, q(1, 3), q(7, 8)).unwrap(),
        },
        ToySystem {
            name: "clause-and-pair",
            system: ConstraintSystem::from_clauses(
                4,
                &[vec![(0, true), (1, false), (2, true)], vec![(2, false), (3, true)]],
            )
            .unwrap(),
            params: LllParams::new(vec![q(1, 3), q(1, 2)], q(3, 4)).unwrap(),
        },
        ToySystem {
            name: "skewed-triangle",
            system: ConstraintSystem::new(
                vec![skew(), skew1, VariableSpec::bit(2)],
                vec![
                    Event::new(0, vec![0, 2], vec![vec![1, 1]]).unwrap(),
                    Event::new(1, vec![1, 2], vec![vec![1, 0]]).unwrap(),
                    Event::new(2, vec![0, 1], vec![vec![1, 1]]).unwrap(),
                ],
            )
            .unwrap(),
            params: LllParams::new(vec![q(1, 4), q(1, 4), q(1, 8)], q(9, 10)).unwrap(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_computable_lll, check_finite_lll};

    #[test]
    fn corpus_meets_size_limits_and_conditions() {
        let corpus = toy_corpus();
        assert!(corpus.len() >= 5);
        for toy in &corpus {
            assert!(toy.system.num_events() <= 3, "{}", toy.name);
            assert!(toy.system.num_variables() <= 4, "{}", toy.name);
            assert!(toy.system.variables().iter().all(|v| v.range_size() == 2), "{}", toy.name);
            let report = if toy.params.alpha() == &one() {
                check_finite_lll(&toy.system, &toy.params).unwrap()
            } else {
                check_computable_lll(&toy.system, &toy.params).unwrap()
            };
            assert!(report.holds(), "{}", toy.name);
        }
    }

    #[test]
    fn chain_neighbors() {
        let sys = four_event_chain();
        assert_eq!(sys.neighbors(1).unwrap(), vec![0, 1, 2]);
        assert_eq!(sys.neighbors(3).unwrap(), vec![3]);
    }
}
