//! Builds a binary sequence with no long runs of equal bits.

use lll_core::corollaries::{bit_string, build_avoiding_sequence, runs_family, scan_forbidden, AvoidMode};
use lll_core::rational::q;

fn main() -> lll_core::Result<()> {
    let forbidden = runs_family(22, 24);
    let out = build_avoiding_sequence(&forbidden, &q(1, 2), &q(99, 100), 2000, &AvoidMode::Empirical { seed: 5 })?;
    println!("beta={} M={} kept={} events={}", out.beta_m.beta, out.beta_m.m, out.kept, out.events);
    println!("scan={}", if scan_forbidden(&out.bits, &forbidden, out.beta_m.m).is_none() { "pass" } else { "fail" });
    println!("prefix={}", &bit_string(&out.bits)[..64]);
    Ok(())
}
