//! Solves a random bounded-degree 3-CNF with the resampling algorithm and
//! replays the log.

use lll_core::corollaries::random_bounded_cnf;
use lll_core::engine::{replay, run_finite};
use lll_core::{ConstraintSystem, Tape};

fn main() -> lll_core::Result<()> {
    let clauses = random_bounded_cnf(3, 2000, 6000, 2, 42)?;
    let system = ConstraintSystem::from_clauses(6000, &clauses)?;
    let run = run_finite(&system, &mut Tape::seeded(7), 1_000_000)?;
    let replayed = replay(&run.log, &system, |_, _| {})?;
    assert_eq!(replayed, run.assignment);
    println!(
        "status={} resamples={} violated={}",
        run.status.as_str(),
        run.resample_count,
        system.violated(&run.assignment).len()
    );
    Ok(())
}
