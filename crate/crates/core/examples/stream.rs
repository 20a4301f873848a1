//! Runs the algorithm on growing prefixes of an infinite sliding-window CNF
//! and prints stability horizons for the first cells.

use lll_core::corollaries::SlidingCnf;
use lll_core::engine::run_family;
use lll_core::family::FamilyParams;
use lll_core::layerwise::{stability_horizon, DEFAULT_BALL_LIMIT};
use lll_core::rational::q;
use lll_core::Tape;

fn main() -> lll_core::Result<()> {
    let family = SlidingCnf::new(4, 2, 3)?;
    let params = FamilyParams::constant(q(1, 4), q(1, 2));
    for k in [10, 100, 1000] {
        let run = run_family(&family, k, &mut Tape::seeded(1), 1_000_000)?;
        println!("events={k} resamples={}", run.resample_count);
    }
    for cell in 0..3 {
        println!("{}", stability_horizon(&family, &params, cell, &q(1, 16), DEFAULT_BALL_LIMIT)?);
    }
    Ok(())
}
