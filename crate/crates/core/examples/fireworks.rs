//! Plays the fireworks game and beats a computable function with high
//! probability.

use lll_core::fireworks::{beat_function, beat_probability_exact, win_probability_exact, Builtin};
use lll_core::rational::{fmt_with_decimal, q};
use lll_core::Tape;

fn main() -> lll_core::Result<()> {
    println!("win(10)={}", fmt_with_decimal(&win_probability_exact(10)?));
    let f = Builtin::parse("identity")?;
    let state = beat_function(&f, &q(1, 10), &mut Tape::seeded(3), 10_000)?;
    println!("{state}");
    println!("beat_probability={}", fmt_with_decimal(&beat_probability_exact(&f, 10, 10_000)));
    Ok(())
}
