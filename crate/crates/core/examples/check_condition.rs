//! Checks the local lemma condition for a chain of clauses and prints the
//! per-event slack.

use lll_core::model::{avoid_bound, check_finite_lll};
use lll_core::rational::{fmt_with_decimal, q};
use lll_core::{ConstraintSystem, LllParams};

fn main() -> lll_core::Result<()> {
    let clauses: Vec<Vec<(usize, bool)>> =
        (0..5).map(|j| (2 * j..2 * j + 3).map(|v| (v, v % 2 == 0)).collect()).collect();
    let system = ConstraintSystem::from_clauses(11, &clauses)?;
    let params = LllParams::uniform(system.num_events(), q(1, 2), q(1, 1))?;
    let report = check_finite_lll(&system, &params)?;
    for e in &report.entries {
        println!("event={} p={} rhs={} holds={}", e.event, fmt_with_decimal(&e.lhs), fmt_with_decimal(&e.rhs), e.holds);
    }
    println!("holds={} avoid_bound={}", report.holds(), fmt_with_decimal(&avoid_bound(&params)));
    Ok(())
}
