//! End-to-end acceptance suite. Runs as a plain binary (no libtest
//! harness) so every criterion prints one PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lll_core::corollaries::{
    build_avoiding_sequence, compute_beta_m, fixed_cnf_condition, fixed_cnf_params, master_rhs, random_bounded_cnf,
    runs_family, scan_forbidden, AvoidMode, SlidingCnf,
};
use lll_core::corpus::{four_event_chain, toy_corpus};
use lll_core::engine::{last_change_steps, run_family, run_finite, ResampleLog, RunStatus, Step};
use lll_core::explore::{all_assignments, check_tree_lemma, explore, ExploreBudget};
use lll_core::family::{FamilyParams, PrefixCache};
use lll_core::fireworks::{
    loss_probability_exact, take_time_sequential, take_time_uniform, win_probability_exact, GameConfig,
};
use lll_core::gw::{check_mt_vs_gw, gw_tree_probability, GwParams};
use lll_core::layerwise::{
    compute_assignment_prefix, extract_from_positive_probability, extract_positive_branch, stability_horizon, Atom,
    PrefixEvidence, PrefixMode, TableOracle, DEFAULT_BALL_LIMIT,
};
use lll_core::model::check_computable_lll;
use lll_core::rational::{self, one, q, to_f64};
use lll_core::witness::{build_witness_tree, WitnessTree};
use lll_core::{ConstraintSystem, Error, LllParams, Rational, Tape};
use num_traits::{Signed, Zero};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn err(e: Error) -> String {
    e.to_string()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Running mean and standard error.
#[derive(Default)]
struct Stats {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Stats {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

fn budget() -> ExploreBudget {
    ExploreBudget { max_bits: 16, ..Default::default() }
}

fn witness_golden() -> Check {
    let system = four_event_chain();
    // events 0..3; neighbor pairs (0,1) and (1,2); event 3 is isolated
    let sequence = [1usize, 0, 2, 3, 1];
    let log = ResampleLog {
        initial: vec![],
        steps: sequence.iter().enumerate().map(|(i, &e)| Step { number: i + 1, event: e, draws: vec![] }).collect(),
    };
    let start = Instant::now();
    let tree = build_witness_tree(&log, 5, &system).map_err(err)?;
    let elapsed = start.elapsed();

    let mut expected = WitnessTree::singleton(1);
    let zero = expected.add_child(0, 0);
    expected.add_child(0, 2);
    expected.add_child(zero, 1);
    ensure(tree.canonical() == expected.canonical(), || format!("got {}", tree.canonical()))?;
    ensure(tree.canonical() == "1(0(1),2)", || format!("got {}", tree.canonical()))?;
    ensure(tree.label_count(3) == 0, || "isolated event entered the tree".into())?;
    let v = tree.vertices();
    ensure(v[0].label == 1 && v[0].depth == 0, || "wrong root".into())?;
    let last = v.iter().filter(|x| x.label == 1).find(|x| x.depth == 2).ok_or("no depth-2 copy of the root label")?;
    ensure(v.iter().any(|p| p.label == 0 && p.depth == 1 && p.children().contains(&last.id)), || {
        "depth-2 vertex not under the label-0 son".into()
    })?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("tree={} built in {elapsed:?}", tree.canonical()))
}

fn gw_formulas() -> Check {
    let system = four_event_chain();
    let one = one();
    let mut lines = Vec::new();
    for z in [vec![q(1, 2); 4], vec![q(1, 3), q(1, 5), q(1, 7), q(1, 2)]] {
        let params = GwParams::new(LllParams::new(z.clone(), one.clone()).map_err(err)?, 1).map_err(err)?;
        // root i = 1, N(1) = {0, 1, 2}; son j = 0, N(0) = {0, 1}
        let (zi, zj, zk) = (&z[1], &z[0], &z[2]);
        let single = (&one - zi) * (&one - zj) * (&one - zk);
        let pair = (&one - zi) * zj * (&one - zk) * ((&one - zi) * (&one - zj));
        let got_single = gw_tree_probability(&WitnessTree::singleton(1), &params, &system).map_err(err)?;
        let got_pair =
            gw_tree_probability(&WitnessTree::parse_canonical("1(0)").map_err(err)?, &params, &system).map_err(err)?;
        ensure(got_single == single && got_pair == pair, || {
            format!("got {} and {}", rational::fmt(&got_single), rational::fmt(&got_pair))
        })?;
        lines.push(format!("{},{}", rational::fmt(&got_single), rational::fmt(&got_pair)));
    }
    ensure(lines[0] == "1/8,1/32", || format!("half weights gave {}", lines[0]))?;
    Ok(format!("z=1/2 -> {}; distinct weights -> {}", lines[0], lines[1]))
}

fn lemma_check() -> Check {
    let corpus = toy_corpus();
    ensure(corpus.len() >= 5, || "corpus too small".into())?;
    let start = Instant::now();
    let mut trees = 0;
    for toy in &corpus {
        let s = &toy.system;
        ensure(s.num_events() <= 3 && s.num_variables() <= 4, || format!("{} too large", toy.name))?;
        let report = check_tree_lemma(s, budget(), 4).map_err(err)?;
        let bad = report.violations().count() + report.undetermined().count();
        ensure(bad == 0, || format!("{}: {bad} trees not certified", toy.name))?;
        ensure(report.final_bits <= 20, || format!("{} needed {} bits", toy.name, report.final_bits))?;
        trees += report.checks.len();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{} systems, {trees} trees certified, 0 violations, {elapsed:.1?}", corpus.len()))
}

fn mt_vs_gw() -> Check {
    let mut trees = 0;
    let mut max_sum = Rational::zero();
    for toy in toy_corpus() {
        let report = check_mt_vs_gw(&toy.system, &toy.params, budget(), 4).map_err(err)?;
        ensure(report.condition.holds(), || format!("{}: parameters invalid", toy.name))?;
        ensure(report.violations() == 0 && report.certified(), || format!("{}: not certified", toy.name))?;
        for s in &report.gw_sums {
            ensure(s <= &one(), || format!("{}: process mass {}", toy.name, rational::fmt(s)))?;
            max_sum = max_sum.max(s.clone());
        }
        trees += report.trees.checks.len();
    }
    Ok(format!("{trees} trees certified, largest process mass {}", rational::decimal(&max_sum)))
}

fn clause_satisfied(clause: &[(usize, bool)], a: &[u32]) -> bool {
    clause.iter().any(|&(v, pos)| (a[v] == 1) == pos)
}

fn expected_steps() -> Check {
    let start = Instant::now();
    let alpha = one();
    let cond = fixed_cnf_condition(3, &alpha).map_err(err)?;
    ensure(cond.holds && cond.z == q(1, 2), || "fixed-size condition".into())?;
    let mut summary = Vec::new();
    for (clauses, formulas, trials) in [(100usize, 10u64, 1000u64), (1000, 10, 1000), (10_000, 10, 1000)] {
        let mut stats = Stats::default();
        for f in 0..formulas {
            let cnf = random_bounded_cnf(3, clauses, 3 * clauses, 2, 1000 * clauses as u64 + f).map_err(err)?;
            let system = ConstraintSystem::from_clauses(3 * clauses, &cnf).map_err(err)?;
            let check = fixed_cnf_params(&system, 3, &alpha, clauses).map_err(err)?;
            ensure(check.holds && check.max_neighbors <= Some(2), || "formula breaks the neighbor bound".into())?;
            for t in 0..trials {
                let run = run_finite(&system, &mut Tape::seeded(f * trials + t), u64::MAX).map_err(err)?;
                ensure(run.status == RunStatus::Satisfied, || "run did not finish".into())?;
                ensure(cnf.iter().all(|c| clause_satisfied(c, &run.assignment)), || {
                    format!("formula {f} trial {t}: unsatisfied clause")
                })?;
                stats.push(run.resample_count as f64);
            }
        }
        // z = 1/2 for every clause, so the bound sum_i z/(1-z) is the clause count
        let bound = clauses as f64;
        let limit = bound + 3.0 * stats.std_error();
        ensure(stats.mean <= limit, || format!("{clauses} clauses: mean {} > {limit}", stats.mean))?;
        summary.push(format!("n={clauses} trials={} mean={:.1} bound={bound}", stats.n, stats.mean));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.1?}", summary.join("; ")))
}

fn stability() -> Check {
    let family = SlidingCnf::new(4, 2, 11).map_err(err)?;
    let params = FamilyParams::constant(q(1, 4), q(1, 2));
    let cells = 0..8usize;
    let deltas = [q(1, 4), q(1, 16)];
    let mut certs = Vec::new();
    for cell in cells.clone() {
        for d in &deltas {
            let c = stability_horizon(&family, &params, cell, d, DEFAULT_BALL_LIMIT).map_err(err)?;
            ensure(c.verify(&family, &params).map_err(err)?, || format!("certificate {c} fails re-check"))?;
            certs.push(c);
        }
    }
    let k = certs.iter().map(|c| c.prefix_needed()).max().unwrap_or(0) + 4;
    let prefix = PrefixCache::new(&family).materialize(k).map_err(err)?;
    let report = check_computable_lll(&prefix, &params.to_lll(prefix.events()).map_err(err)?).map_err(err)?;
    ensure(report.holds(), || "weights break the strengthened condition".into())?;

    let trials = 10_000u64;
    let mut late = vec![0u64; certs.len()];
    for seed in 0..trials {
        let run = run_family(&family, k, &mut Tape::seeded(seed), u64::MAX).map_err(err)?;
        let last = last_change_steps(&run.log, cells.end);
        for (c, slot) in certs.iter().zip(late.iter_mut()) {
            if last[c.cell] as u64 > c.horizon {
                *slot += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for (c, &n) in certs.iter().zip(&late) {
        let p = n as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let delta = to_f64(&c.delta);
        ensure(p <= delta + 3.0 * se, || format!("{c}: change frequency {p}"))?;
        worst = worst.max(p / delta);
    }
    let horizons: Vec<String> =
        certs.iter().take(4).map(|c| format!("N({},{})={}", c.cell, rational::fmt(&c.delta), c.horizon)).collect();
    Ok(format!(
        "{} certificates, {trials} trials on {k} events, worst frequency/delta {worst:.3}; {}",
        certs.len(),
        horizons.join(" ")
    ))
}

fn exact_prefix() -> Check {
    let mut checked = 0;
    for toy in toy_corpus() {
        let system = &toy.system;
        let params = FamilyParams::from_params(&toy.params);
        let avoiding: Vec<(Vec<u32>, Rational)> = all_assignments(system, 1 << 12)
            .map_err(err)?
            .into_iter()
            .filter(|(a, p)| p.is_positive() && system.events().iter().all(|e| !e.holds(a)))
            .collect();
        let ex = explore(system, ExploreBudget { max_bits: 20, ..Default::default() }).map_err(err)?;
        for len in 1..=system.num_variables() {
            let mode = PrefixMode::Exact { events: None, bit_guard: 20 };
            let out = compute_assignment_prefix(system, &params, len, &mode).map_err(err)?;
            ensure(out.values.len() == len, || format!("{}: wrong prefix length", toy.name))?;
            for &i in &out.decided_events {
                let e = &system.events()[i];
                ensure(e.vbl().iter().all(|&v| v < len), || format!("{}: event {i} not decided", toy.name))?;
                ensure(!e.holds_with(|v| out.values[v]), || format!("{}: event {i} holds", toy.name))?;
            }
            let PrefixEvidence::Certified { lower_bound, .. } = &out.evidence else {
                return Err(format!("{}: exact mode without a certificate", toy.name));
            };
            ensure(lower_bound.is_positive(), || format!("{}: lower bound not positive", toy.name))?;
            let extends = avoiding.iter().any(|(a, _)| a.starts_with(&out.values));
            ensure(extends, || format!("{}: prefix {:?} extends to no avoiding assignment", toy.name, out.values))?;
            let hi = ex.outcome_probability(|a| a.starts_with(&out.values)).hi;
            ensure(lower_bound <= &hi, || format!("{}: lower bound above the output mass", toy.name))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} prefixes certified and cross-checked against brute force"))
}

/// Float evaluation of the right-hand side, independent of the interval code.
fn rhs_float(gamma: f64, alpha: f64, beta: f64, size: usize) -> f64 {
    let d = beta - gamma;
    alpha * 2f64.powf(-beta) * (1.0 - 2f64.powf(-d * size as f64) / (1.0 - 2f64.powf(-d)))
}

fn corollary_two() -> Check {
    let start = Instant::now();
    let (gamma, alpha) = (q(1, 2), q(99, 100));
    let bm = compute_beta_m(&gamma, &alpha).map_err(err)?;
    ensure(bm.beta == q(3, 4), || format!("beta = {}", rational::fmt(&bm.beta)))?;
    let half = q(1, 2);
    let at = master_rhs(&gamma, &alpha, &bm.beta, bm.m, 128);
    let below = master_rhs(&gamma, &alpha, &bm.beta, bm.m - 1, 128);
    ensure(at.lo >= half && below.hi < half, || format!("M = {} not separated", bm.m))?;
    let (f_at, f_below) = (rhs_float(0.5, 0.99, 0.75, bm.m), rhs_float(0.5, 0.99, 0.75, bm.m - 1));
    ensure(f_at > 0.5 && f_below < 0.5, || format!("float check disagrees: {f_at} {f_below}"))?;

    let forbidden = runs_family(2, 12);
    let out =
        build_avoiding_sequence(&forbidden, &gamma, &alpha, 10_000, &AvoidMode::Empirical { seed: 1 }).map_err(err)?;
    ensure(out.bits.len() == 10_000, || "short prefix".into())?;
    ensure(scan_forbidden(&out.bits, &forbidden, bm.m).is_none(), || "scan found a forbidden string".into())?;

    // every string above is shorter than M; runs of lengths M..M+2 make the
    // same pipeline resample for real
    let longer = runs_family(bm.m, bm.m + 2);
    let strict =
        build_avoiding_sequence(&longer, &gamma, &alpha, 10_000, &AvoidMode::Empirical { seed: 1 }).map_err(err)?;
    ensure(strict.kept == longer.len() && strict.events > 0, || "runs of length >= M were dropped".into())?;
    ensure(strict.condition.as_ref().is_some_and(|c| c.holds()), || "condition fails on the prefix".into())?;
    ensure(scan_forbidden(&strict.bits, &longer, bm.m).is_none(), || "scan found a long run".into())?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "beta=3/4 M={} (rhs at M-1 < 1/2 <= rhs at M); F kept {} of {}; runs {}..{} kept {}, {} events, {} resamples; {elapsed:.1?}",
        bm.m,
        out.kept,
        forbidden.len(),
        bm.m,
        bm.m + 2,
        strict.kept,
        strict.events,
        strict.resamples.unwrap_or(0)
    ))
}

fn fireworks() -> Check {
    let win = win_probability_exact(100).map_err(err)?;
    ensure(win == q(99, 100), || format!("win probability {}", rational::fmt(&win)))?;
    for n in [1u64, 2, 10, 100] {
        let mut worst = Rational::zero();
        for k in (0..2 * n).map(Some).chain([None]) {
            let loss = loss_probability_exact(&GameConfig::new(n, k).map_err(err)?);
            worst = worst.max(loss);
        }
        ensure(worst == q(1, n as i64), || format!("n={n}: worst loss {}", rational::fmt(&worst)))?;
    }
    for n in 1..=100 {
        ensure(take_time_uniform(n) == take_time_sequential(n), || format!("strategies differ at n={n}"))?;
    }
    Ok("win(100)=99/100, worst loss 1/n for n in {1,2,10,100}, strategies agree for n<=100".into())
}

fn extraction() -> Check {
    let mut point = TableOracle::point(vec![1, 1], vec![0, 1]);
    let ex = extract_from_positive_probability(&mut point, &q(3, 5), &[], 6, 20).map_err(err)?;
    ensure(ex.values == [1, 1, 0, 1, 0, 1], || format!("point mass gave {:?}", ex.values))?;
    let mut point = TableOracle::point(vec![1, 1], vec![0, 1]);
    let ex = extract_positive_branch(&mut point, 6, 20).map_err(err)?;
    ensure(ex.values == [1, 1, 0, 1, 0, 1], || format!("positive branch gave {:?}", ex.values))?;

    let two = || {
        TableOracle::new(
            vec![
                Atom { prefix: vec![0], cycle: vec![1], mass: q(3, 4) },
                Atom { prefix: vec![1], cycle: vec![0], mass: q(1, 4) },
            ],
            2,
        )
        .unwrap()
    };
    // heavy branch 0111...: q(empty) = 1 < 2r and 3/4 > r
    let ex = extract_from_positive_probability(&mut two(), &q(3, 5), &[], 5, 20).map_err(err)?;
    ensure(ex.values == [0, 1, 1, 1, 1], || format!("two atoms gave {:?}", ex.values))?;
    ensure(ex.lower_bounds.iter().all(|b| b > &q(3, 5)), || "recorded bound not above r".into())?;
    // light branch with a valid r from inside it
    let ex = extract_from_positive_probability(&mut two(), &q(1, 5), &[1], 3, 20).map_err(err)?;
    ensure(ex.values == [0, 0, 0], || format!("light branch gave {:?}", ex.values))?;
    for bad in [q(1, 10), q(1, 20)] {
        let got = extract_from_positive_probability(&mut two(), &bad, &[], 3, 20);
        ensure(matches!(got, Err(Error::Contract(_))), || format!("r={} not flagged: {got:?}", rational::fmt(&bad)))?;
    }
    Ok("point mass and two-atom oracles extracted, invalid r flagged".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("witness tree golden", witness_golden),
        ("process formulas", gw_formulas),
        ("exhaustive tree lemma", lemma_check),
        ("exhaustive MT vs process", mt_vs_gw),
        ("expected resamplings", expected_steps),
        ("stability certificates", stability),
        ("exact computable prefix", exact_prefix),
        ("forbidden substrings pipeline", corollary_two),
        ("fireworks exactness", fireworks),
        ("extraction", extraction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
