//! Compares appearance probabilities with the branching-process law on the
//! toy corpus.

use lll_core::corpus::toy_corpus;
use lll_core::explore::ExploreBudget;
use lll_core::gw::check_mt_vs_gw;
use lll_core::rational::decimal;

fn main() -> lll_core::Result<()> {
    for toy in toy_corpus() {
        let budget = ExploreBudget { max_bits: 14, ..Default::default() };
        let r = check_mt_vs_gw(&toy.system, &toy.params, budget, 4)?;
        let sums: Vec<String> = r.gw_sums.iter().map(decimal).collect();
        println!(
            "{} trees={} certified={} gw_sums=[{}]",
            toy.name,
            r.trees.checks.len(),
            r.certified(),
            sums.join(",")
        );
    }
    Ok(())
}
