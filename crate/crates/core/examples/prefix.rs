//! Computes certified prefixes of avoiding assignments and extracts a
//! branch from a table oracle.

use lll_core::corpus::toy_corpus;
use lll_core::family::FamilyParams;
use lll_core::layerwise::{
    compute_assignment_prefix, extract_positive_branch, PrefixEvidence, PrefixMode, TableOracle,
};
use lll_core::rational::fmt_with_decimal;

fn main() -> lll_core::Result<()> {
    for toy in toy_corpus() {
        let params = FamilyParams::from_params(&toy.params);
        let mode = PrefixMode::Exact { events: None, bit_guard: 20 };
        let out = compute_assignment_prefix(&toy.system, &params, toy.system.num_variables(), &mode)?;
        if let PrefixEvidence::Certified { lower_bound, bits } = &out.evidence {
            println!("{} prefix={:?} mass>={} bits={bits}", toy.name, out.values, fmt_with_decimal(lower_bound));
        }
    }
    let mut oracle = TableOracle::point(vec![1], vec![0, 0, 1]);
    println!("table branch={:?}", extract_positive_branch(&mut oracle, 8, 20)?.values);
    Ok(())
}
