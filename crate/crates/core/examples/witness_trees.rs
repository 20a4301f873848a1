//! Builds the witness trees of a short run and checks the tree lemma
//! exhaustively on a toy system.

use lll_core::corpus::{four_event_chain, three_clause_triangle};
use lll_core::explore::{check_tree_lemma, ExploreBudget};
use lll_core::witness::build_from_events;

fn main() -> lll_core::Result<()> {
    let chain = four_event_chain();
    let events = [1, 0, 2, 3, 1];
    for k in 1..=events.len() {
        let t = build_from_events(&events, k, &chain)?;
        println!("step={k} tree={}", t.canonical());
    }
    let budget = ExploreBudget { max_bits: 14, ..Default::default() };
    let report = check_tree_lemma(&three_clause_triangle(), budget, 4)?;
    for c in report.checks.iter().take(5) {
        println!("{} p_mt<={} bound={} {:?}", c.canonical, c.p_mt.hi, c.bound, c.verdict);
    }
    println!("trees={} certified={}", report.checks.len(), report.certified());
    Ok(())
}
