//! The `lll` command-line front end.
//!
//! Every subcommand prints line-oriented `key=value` reports. Rationals are
//! printed exactly as `num/den` with a decimal in parentheses. Exit codes:
//! 0 success, 1 a condition or verification failed, 2 usage or input error,
//! 3 a budget was refused.
//!
//! `--manifest <path>` records the run (arguments, input digests, seed,
//! output digest); `--replay <path>` re-runs a recorded manifest and checks
//! that the output is identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::One;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corollaries::{bit_string, build_avoiding_sequence, AvoidMode, SlidingCnf};
use crate::corpus::toy_corpus;
use crate::engine::{first_k_stable_time, run_family, run_finite, RunStatus};
use crate::error::{Error, Result};
use crate::explore::{check_tree_lemma, ExploreBudget};
use crate::family::{EventFamily, FamilyParams};
use crate::fireworks::{
    beat_function, beat_function_with_k, beat_probability_exact, loss_probability_exact, play_game, play_with_k,
    reciprocal, win_probability_exact, Builtin, FnOracle, GameConfig,
};
use crate::formats::{parse_dimacs, parse_system};
use crate::gw::check_mt_vs_gw;
use crate::layerwise::{
    compute_assignment_prefix, extract_from_positive_probability, extract_positive_branch, stability_horizon, Atom,
    MtOutputOracle, PrefixEvidence, PrefixMode, QOracle, TableOracle, DEFAULT_BALL_LIMIT,
};
use crate::model::{check_computable_lll, check_finite_lll, ConstraintSystem, LllParams};
use crate::rational::{self, fmt_with_decimal as rq, Rational};
use crate::tape::Tape;
use crate::witness::{build_from_events, trees_for_events};

#[derive(Parser, Debug)]
#[command(name = "lll", version, about = "Constructive local lemma toolkit")]
pub struct Cli {
    /// Write a run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Re-run a manifest and compare outputs.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Worker threads for enumeration and trials.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the local lemma condition.
    Check(CheckArgs),
    /// Run the resampling algorithm on a finite system.
    Solve(SolveArgs),
    /// Run the algorithm on a prefix of an infinite clause family.
    Stream(StreamArgs),
    /// Build witness trees from a resampling log.
    Witness(WitnessArgs),
    /// Compare tree appearance with the branching process bound.
    Gw(GwArgs),
    /// Extract values from a lower-semicomputable measure.
    Extract(ExtractArgs),
    /// Compute a prefix of an avoiding assignment.
    Prefix(PrefixArgs),
    /// Build a sequence avoiding long forbidden substrings.
    Avoid(AvoidArgs),
    /// Play the fireworks game or beat a budgeted function.
    Fireworks(FireworksArgs),
    /// Run the exhaustive checks on the built-in toy systems.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum InputFormat {
    Auto,
    Dimacs,
    System,
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// DIMACS CNF or the text system format.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Same weight for every event (overrides the file).
    #[arg(long)]
    pub z: Option<String>,
    /// Overrides the file's alpha.
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Event lines to print; failures are always printed.
    #[arg(long, default_value_t = 20)]
    pub show: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, env = "LLL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Explicit tape as hex; replaces the seed.
    #[arg(long)]
    pub tape_hex: Option<String>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Write the resampling log as JSON.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StreamArgs {
    /// Clause size of the sliding family.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
    #[arg(long, default_value_t = 1)]
    pub family_seed: u64,
    /// Number of events taken from the family.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, env = "LLL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: u64,
    /// Cells of the assignment to print.
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
}

#[derive(Args, Debug)]
pub struct WitnessArgs {
    /// System the log refers to.
    pub system: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// JSON log written by `solve --log`.
    #[arg(long, conflicts_with = "events")]
    pub log: Option<PathBuf>,
    /// Comma-separated event indices, in resampling order.
    #[arg(long)]
    pub events: Option<String>,
    /// Only the tree of this step (1-based).
    #[arg(long)]
    pub step: Option<usize>,
    /// Also print the indented form.
    #[arg(long)]
    pub indented: bool,
}

#[derive(Args, Debug)]
pub struct GwArgs {
    /// System file with `z` lines and `alpha`.
    pub system: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub bits: usize,
    #[arg(long, default_value_t = 20)]
    pub refine: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// An atom `PREFIX|CYCLE@MASS` of a table measure, e.g. `01|1@1/2`.
    #[arg(long = "atom")]
    pub atoms: Vec<String>,
    /// Use the output measure of this system instead of a table.
    #[arg(long, conflicts_with = "atoms")]
    pub system: Option<PathBuf>,
    /// Range of every cell of a table measure.
    #[arg(long, default_value_t = 2)]
    pub range: usize,
    /// Threshold; without it the positive branch is extracted.
    #[arg(long)]
    pub r: Option<String>,
    /// Starting prefix, as digits.
    #[arg(long, default_value = "")]
    pub w: String,
    #[arg(long, default_value_t = 4)]
    pub cells: usize,
    #[arg(long, default_value_t = 64)]
    pub rounds: u32,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
    #[arg(long, default_value_t = 20)]
    pub bits: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Empirical,
}

#[derive(Args, Debug)]
pub struct PrefixArgs {
    /// A finite system; without it the sliding clause family is used.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
    #[arg(long, default_value_t = 1)]
    pub family_seed: u64,
    #[arg(long, default_value = "1/4")]
    pub z: String,
    #[arg(long, default_value = "1/2")]
    pub alpha: String,
    #[arg(long, default_value_t = 8)]
    pub len: usize,
    #[arg(long, value_enum, default_value = "empirical")]
    pub mode: Mode,
    /// Events explored in exact mode (all of a finite system by default).
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub bits: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, env = "LLL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1/4")]
    pub delta: String,
}

#[derive(Args, Debug)]
pub struct AvoidArgs {
    /// One binary string per line.
    #[arg(long)]
    pub forbidden: PathBuf,
    #[arg(long, default_value = "1/2")]
    pub gamma: String,
    #[arg(long, default_value = "99/100")]
    pub alpha: String,
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[arg(long, value_enum, default_value = "empirical")]
    pub mode: Mode,
    #[arg(long, env = "LLL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bits: usize,
}

#[derive(Args, Debug)]
pub struct FireworksArgs {
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Good fireworks before the bad one; all good when absent.
    #[arg(long = "seller-K", alias = "seller-k")]
    pub seller_k: Option<u64>,
    /// `constant:C`, `identity` or `diverge-at:I,J`.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Replaces `1/n` as the error for the oracle protocol.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Fixes the buyer's number instead of drawing it.
    #[arg(long)]
    pub k: Option<u64>,
    #[arg(long, default_value_t = 200)]
    pub ticks: u64,
    #[arg(long, env = "LLL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 16)]
    pub bits: usize,
    #[arg(long, default_value_t = 20)]
    pub refine: usize,
}

/// What a run printed and how it ended.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub inputs: Vec<InputRecord>,
    pub seed: Option<u64>,
    pub budgets: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
    pub exit_code: i32,
    pub stdout_sha256: String,
}

const BUDGET_FLAGS: &[&str] =
    &["max-steps", "bits", "refine", "trials", "ticks", "rounds", "length", "len", "k", "cells"];

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Budget(_) | Error::Timeout(_) | Error::TapeExhausted { .. } => 3,
        Error::Verification(_) | Error::Contract(_) => 1,
        _ => 2,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Params(format!("cannot read {}: {e}", path.display())))
}

fn rat(text: &str) -> Result<Rational> {
    rational::parse(text)
}

/// Digits when every value is below 10, comma-separated otherwise.
pub fn render_values(values: &[u32]) -> String {
    if values.iter().all(|v| *v < 10) {
        values.iter().map(|v| char::from_digit(*v, 10).expect("digit")).collect()
    } else {
        values.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }
}

fn load_system(path: &Path, format: InputFormat) -> Result<(ConstraintSystem, Option<LllParams>)> {
    let text = read(path)?;
    let dimacs = match format {
        InputFormat::Dimacs => true,
        InputFormat::System => false,
        InputFormat::Auto => {
            path.extension().is_some_and(|e| e == "cnf") || text.lines().any(|l| l.trim_start().starts_with("p cnf"))
        }
    };
    if dimacs {
        Ok((parse_dimacs(&text)?, None))
    } else {
        let f = parse_system(&text)?;
        Ok((f.system, f.params))
    }
}

/// Weights from the flags, then the file, then `2^-(m-2)` for clause
/// systems of minimum size `m >= 3`.
fn resolve_params(system: &ConstraintSystem, file: Option<LllParams>, args: &InputArgs) -> Result<LllParams> {
    let alpha = match &args.alpha {
        Some(a) => rat(a)?,
        None => file.as_ref().map_or_else(Rational::one, |p| p.alpha().clone()),
    };
    if let Some(z) = &args.z {
        return LllParams::uniform(system.num_events(), rat(z)?, alpha);
    }
    if let Some(p) = file {
        return p.with_alpha(alpha);
    }
    let m = system.events().iter().map(|e| e.vbl().len()).min().unwrap_or(3);
    if m < 3 {
        return Err(Error::Params("no weights given and clauses are shorter than 3; pass --z".into()));
    }
    LllParams::uniform(system.num_events(), rational::half_pow((m - 2) as u32), alpha)
}

fn parse_indices(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::Params(format!("bad index {s:?}"))))
        .collect()
}

fn parse_digits(text: &str) -> Result<Vec<u32>> {
    text.chars().map(|c| c.to_digit(10).ok_or_else(|| Error::Params(format!("bad digit {c:?}")))).collect()
}

type Out = String;

fn cmd_check(a: &CheckArgs, out: &mut Out) -> Result<i32> {
    let (system, file) = load_system(&a.input.input, a.input.format)?;
    let params = resolve_params(&system, file, &a.input)?;
    let report = if params.alpha().is_one() {
        check_finite_lll(&system, &params)?
    } else {
        check_computable_lll(&system, &params)?
    };
    for (i, e) in report.entries.iter().enumerate() {
        if i < a.show || !e.holds {
            writeln!(out, "event={} lhs={} rhs={} holds={}", e.event, rq(&e.lhs), rq(&e.rhs), e.holds).ok();
        }
    }
    let tight = report.entries.iter().filter(|e| e.lhs == e.rhs).count();
    writeln!(
        out,
        "events={} factor={} holds={} tight={} failures={} avoid_bound={}",
        report.entries.len(),
        rq(&report.factor),
        report.holds(),
        tight,
        report.failures().count(),
        rq(&crate::model::avoid_bound(&params))
    )
    .ok();
    Ok(if report.holds() { 0 } else { 1 })
}

fn cmd_solve(a: &SolveArgs, out: &mut Out) -> Result<i32> {
    let (system, file) = load_system(&a.input.input, a.input.format)?;
    let params = resolve_params(&system, file, &a.input).ok();
    let max_steps = match (a.max_steps, &params) {
        (Some(s), _) => s,
        (None, Some(p)) => p.default_max_steps()?.max(100),
        (None, None) => 1000 * (system.num_events() as u64 + 1),
    };
    let mut tape = match &a.tape_hex {
        Some(h) => Tape::from_hex(h)?,
        None => Tape::seeded(a.seed),
    };
    let result = match run_finite(&system, &mut tape, max_steps) {
        Ok(r) => r,
        Err(Error::TapeExhausted { bits, partial }) => {
            if let Some(p) = partial {
                writeln!(out, "assignment={}", render_values(&p.assignment)).ok();
                writeln!(out, "resamples={} status=tape_exhausted", p.resample_count).ok();
            }
            return Err(Error::TapeExhausted { bits, partial: None });
        }
        Err(e) => return Err(e),
    };
    writeln!(out, "assignment={}", render_values(&result.assignment)).ok();
    writeln!(out, "resamples={} status={}", result.resample_count, result.status.as_str()).ok();
    writeln!(out, "max_steps={} tape_bits={}", max_steps, tape.bits_used()).ok();
    if let Some(p) = &params {
        let bound: Rational = p.z().iter().map(|z| z / (Rational::one() - z)).sum();
        writeln!(out, "expected_bound={}", rq(&bound)).ok();
    }
    if let Some(path) = &a.log {
        let json = serde_json::to_string_pretty(&result.log).map_err(|e| Error::Params(e.to_string()))?;
        std::fs::write(path, json)?;
    }
    match result.status {
        RunStatus::Satisfied => {
            let violated = system.violated(&result.assignment);
            if !violated.is_empty() {
                return Err(Error::Verification(format!("events {violated:?} hold at the end")));
            }
            writeln!(out, "verified=true").ok();
            Ok(0)
        }
        RunStatus::BudgetExceeded => Ok(3),
    }
}

fn cmd_stream(a: &StreamArgs, out: &mut Out) -> Result<i32> {
    let family = SlidingCnf::new(a.m, a.stride, a.family_seed)?;
    let mut tape = Tape::seeded(a.seed);
    let result = run_family(&family, a.k, &mut tape, a.max_steps)?;
    let system = crate::family::PrefixCache::new(&family).materialize(a.k)?;
    let tk = first_k_stable_time(&result.log, &system, a.k)?;
    let shown = &result.assignment[..a.cells.min(result.assignment.len())];
    writeln!(out, "family=sliding m={} stride={} events={} variables={}", a.m, a.stride, a.k, system.num_variables())
        .ok();
    writeln!(out, "prefix={}", render_values(shown)).ok();
    writeln!(out, "resamples={} status={}", result.resample_count, result.status.as_str()).ok();
    if let Some(t) = tk {
        writeln!(out, "t_k={t}").ok();
    }
    Ok(if result.status == RunStatus::Satisfied { 0 } else { 3 })
}

fn cmd_witness(a: &WitnessArgs, out: &mut Out) -> Result<i32> {
    let (system, _) = load_system(&a.system, a.format)?;
    let events = match (&a.log, &a.events) {
        (Some(p), _) => {
            let log: crate::engine::ResampleLog =
                serde_json::from_str(&read(p)?).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
            log.events()
        }
        (None, Some(s)) => parse_indices(s)?,
        (None, None) => return Err(Error::Params("pass --log or --events".into())),
    };
    let trees = match a.step {
        Some(k) => vec![(k, build_from_events(&events, k, &system)?)],
        None => trees_for_events(&events, &system)?.into_iter().enumerate().map(|(i, t)| (i + 1, t)).collect(),
    };
    for (k, t) in &trees {
        writeln!(out, "step={} tree={} size={} depth={}", k, t.canonical(), t.size(), t.depth()).ok();
        if a.indented {
            for line in t.render_indented().lines() {
                writeln!(out, "  {line}").ok();
            }
        }
    }
    writeln!(out, "steps={} trees={}", events.len(), trees.len()).ok();
    Ok(0)
}

fn cmd_gw(a: &GwArgs, out: &mut Out) -> Result<i32> {
    let (system, file) = load_system(&a.system, InputFormat::System)?;
    let params = file.ok_or_else(|| Error::Params("the system file needs z lines".into()))?;
    let budget = ExploreBudget { max_bits: a.bits, max_steps: a.max_steps, ..ExploreBudget::default() };
    let report = check_mt_vs_gw(&system, &params, budget, a.refine)?;
    for c in &report.trees.checks {
        let ok = c.verdict == crate::explore::Verdict::Certified;
        writeln!(
            out,
            "tree={} p_mt={} bound={} ok={} p_mt_lo={}",
            c.canonical,
            rq(&c.p_mt.hi),
            rq(&c.bound),
            ok,
            rq(&c.p_mt.lo)
        )
        .ok();
    }
    for t in &report.tails {
        let ok = t.verdict == crate::explore::Verdict::Certified;
        writeln!(
            out,
            "tail root={} min_size={} p_mt={} bound={} ok={}",
            t.root,
            t.min_size,
            rq(&t.p_mt.hi),
            rq(&t.bound),
            ok
        )
        .ok();
    }
    for (root, s) in report.gw_sums.iter().enumerate() {
        writeln!(out, "gw_sum root={} value={} ok={}", root, rq(s), s <= &Rational::one()).ok();
    }
    let undetermined = report.trees.undetermined().count();
    writeln!(
        out,
        "condition={} trees={} violations={} undetermined={} unresolved_mass={} bits={}",
        report.condition.holds(),
        report.trees.checks.len(),
        report.violations(),
        undetermined,
        rq(&report.trees.unresolved_mass),
        report.trees.final_bits
    )
    .ok();
    Ok(if report.certified() {
        0
    } else if report.violations() > 0 || !report.condition.holds() {
        1
    } else {
        3
    })
}

fn parse_atom(text: &str) -> Result<Atom> {
    let bad = || Error::Params(format!("bad atom {text:?}; expected PREFIX|CYCLE@MASS"));
    let (word, mass) = text.split_once('@').ok_or_else(bad)?;
    let (prefix, cycle) = word.split_once('|').unwrap_or((word, ""));
    Ok(Atom { prefix: parse_digits(prefix)?, cycle: parse_digits(cycle)?, mass: rat(mass)? })
}

fn cmd_extract(a: &ExtractArgs, out: &mut Out) -> Result<i32> {
    let w = parse_digits(&a.w)?;
    let loaded;
    let mut oracle: Box<dyn QOracle> = match &a.system {
        Some(p) => {
            loaded = load_system(p, InputFormat::Auto)?.0;
            Box::new(MtOutputOracle::new(&loaded, a.max_steps, a.bits)?)
        }
        None => {
            let atoms = a.atoms.iter().map(|s| parse_atom(s)).collect::<Result<Vec<_>>>()?;
            Box::new(TableOracle::new(atoms, a.range)?)
        }
    };
    let extraction = match &a.r {
        Some(r) => extract_from_positive_probability(oracle.as_mut(), &rat(r)?, &w, a.cells, a.rounds)?,
        None => extract_positive_branch(oracle.as_mut(), a.cells, a.rounds)?,
    };
    for (i, (v, lb)) in extraction.values.iter().zip(&extraction.lower_bounds).enumerate() {
        writeln!(out, "cell={} value={} lower={}", i, v, rq(lb)).ok();
    }
    writeln!(out, "values={}", render_values(&extraction.values)).ok();
    Ok(0)
}

fn cmd_prefix(a: &PrefixArgs, out: &mut Out) -> Result<i32> {
    let params = FamilyParams::constant(rat(&a.z)?, rat(&a.alpha)?);
    let loaded;
    let sliding;
    let family: &dyn EventFamily = match &a.system {
        Some(p) => {
            loaded = load_system(p, InputFormat::Auto)?.0;
            &loaded
        }
        None => {
            sliding = SlidingCnf::new(a.m, a.stride, a.family_seed)?;
            &sliding
        }
    };
    let mode = match a.mode {
        Mode::Exact => PrefixMode::Exact { events: a.events, bit_guard: a.bits },
        Mode::Empirical => {
            let delta = rat(&a.delta)?;
            for cell in 0..a.len {
                let cert = stability_horizon(family, &params, cell, &delta, DEFAULT_BALL_LIMIT)?;
                writeln!(out, "{cert}").ok();
            }
            PrefixMode::Empirical { trials: a.trials, seed: a.seed, delta }
        }
    };
    let outcome = compute_assignment_prefix(family, &params, a.len, &mode)?;
    writeln!(out, "values={}", render_values(&outcome.values)).ok();
    writeln!(out, "decided_events={}", outcome.decided_events.len()).ok();
    match &outcome.evidence {
        PrefixEvidence::Certified { lower_bound, bits } => {
            writeln!(out, "evidence=certified lower_bound={} bits={}", rq(lower_bound), bits).ok();
        }
        PrefixEvidence::Report { cells, satisfied_trials, trials, fallback } => {
            for c in cells {
                writeln!(
                    out,
                    "cell={} value={} N={} stable={} agreement={}",
                    c.cell,
                    c.value,
                    c.horizon,
                    rq(&c.stable_fraction),
                    rq(&c.agreement)
                )
                .ok();
            }
            writeln!(out, "evidence=empirical satisfied_trials={satisfied_trials} trials={trials} fallback={fallback}")
                .ok();
        }
    }
    Ok(0)
}

fn longest_run(bits: &[u32]) -> usize {
    bits.chunk_by(|a, b| a == b).map(<[u32]>::len).max().unwrap_or(0)
}

fn cmd_avoid(a: &AvoidArgs, out: &mut Out) -> Result<i32> {
    let text = read(&a.forbidden)?;
    let forbidden: Vec<String> =
        text.lines().map(|l| l.split('#').next().unwrap_or("").trim().to_string()).filter(|l| !l.is_empty()).collect();
    let mode = match a.mode {
        Mode::Exact => AvoidMode::Exact { bit_guard: a.bits },
        Mode::Empirical => AvoidMode::Empirical { seed: a.seed },
    };
    let r = build_avoiding_sequence(&forbidden, &rat(&a.gamma)?, &rat(&a.alpha)?, a.length, &mode)?;
    writeln!(out, "beta={} M={}", rq(&r.beta_m.beta), r.beta_m.m).ok();
    writeln!(out, "rhs_at_M_lo={}", rq(&r.beta_m.rhs_at_m.lo)).ok();
    if let Some(b) = &r.beta_m.rhs_below {
        writeln!(out, "rhs_below_M_hi={}", rq(&b.hi)).ok();
    }
    for d in &r.dropped {
        writeln!(out, "dropped={} reason={}", d.string, d.reason.replace(' ', "_")).ok();
    }
    writeln!(out, "kept={} events={} length={}", r.kept, r.events, r.bits.len()).ok();
    if let Some(c) = &r.condition {
        writeln!(out, "condition={}", c.holds()).ok();
    }
    if let Some(s) = r.resamples {
        writeln!(out, "resamples={s}").ok();
    }
    writeln!(out, "longest_run={}", longest_run(&r.bits)).ok();
    writeln!(out, "prefix={}", bit_string(&r.bits)).ok();
    writeln!(out, "scan=pass").ok();
    Ok(0)
}

fn cmd_fireworks(a: &FireworksArgs, out: &mut Out) -> Result<i32> {
    match &a.oracle {
        None => {
            let config = GameConfig::new(a.n, a.seller_k)?;
            let result = match a.k {
                Some(k) if k < a.n => play_with_k(&config, k),
                Some(k) => return Err(Error::Params(format!("k={k} outside 0..{}", a.n))),
                None => play_game(&config, &mut Tape::seeded(a.seed))?,
            };
            let seller = a.seller_k.map_or("none".to_string(), |k| k.to_string());
            writeln!(
                out,
                "n={} seller_K={} k={} outcome={} tests_made={}",
                a.n, seller, result.k, result.outcome, result.tests_made
            )
            .ok();
            writeln!(out, "loss_probability={}", rq(&loss_probability_exact(&config))).ok();
            writeln!(out, "win_probability_worst={}", rq(&win_probability_exact(a.n)?)).ok();
        }
        Some(name) => {
            let f = Builtin::parse(name)?;
            let eps = match &a.epsilon {
                Some(e) => rat(e)?,
                None => rational::q(1, a.n as i64),
            };
            let n = reciprocal(&eps)?;
            let state = match a.k {
                Some(k) if k < n => beat_function_with_k(&f, k, a.ticks),
                Some(k) => return Err(Error::Params(format!("k={k} outside 0..{n}"))),
                None => beat_function(&f, &eps, &mut Tape::seeded(a.seed), a.ticks)?,
            };
            let status = serde_json::to_value(state.status).map_err(|e| Error::Params(e.to_string()))?;
            writeln!(out, "oracle={} n={} {} status={}", f.name(), n, state, status["status"].as_str().unwrap_or("?"))
                .ok();
            writeln!(out, "beat_probability={}", rq(&beat_probability_exact(&f, n, a.ticks))).ok();
        }
    }
    Ok(0)
}

fn cmd_selftest(a: &SelftestArgs, out: &mut Out) -> Result<i32> {
    let budget = ExploreBudget { max_bits: a.bits, ..ExploreBudget::default() };
    let mut all = true;
    for toy in toy_corpus() {
        let lemma = check_tree_lemma(&toy.system, budget, a.refine)?;
        let gw = check_mt_vs_gw(&toy.system, &toy.params, budget, a.refine)?;
        let ok = lemma.certified() && gw.certified();
        all &= ok;
        writeln!(
            out,
            "system={} trees={} lemma_violations={} lemma_undetermined={} gw_violations={} gw_certified={} ok={}",
            toy.name,
            lemma.checks.len(),
            lemma.violations().count(),
            lemma.undetermined().count(),
            gw.violations(),
            gw.certified(),
            ok
        )
        .ok();
    }
    writeln!(out, "selftest={}", if all { "pass" } else { "fail" }).ok();
    Ok(if all { 0 } else { 1 })
}

fn execute(command: &Command, out: &mut Out) -> Result<i32> {
    match command {
        Command::Check(a) => cmd_check(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Stream(a) => cmd_stream(a, out),
        Command::Witness(a) => cmd_witness(a, out),
        Command::Gw(a) => cmd_gw(a, out),
        Command::Extract(a) => cmd_extract(a, out),
        Command::Prefix(a) => cmd_prefix(a, out),
        Command::Avoid(a) => cmd_avoid(a, out),
        Command::Fireworks(a) => cmd_fireworks(a, out),
        Command::Selftest(a) => cmd_selftest(a, out),
    }
}

fn input_paths(command: &Command) -> Vec<&Path> {
    match command {
        Command::Check(a) => vec![&a.input.input],
        Command::Solve(a) => vec![&a.input.input],
        Command::Witness(a) => [Some(&a.system), a.log.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect(),
        Command::Gw(a) => vec![&a.system],
        Command::Extract(a) => a.system.iter().map(PathBuf::as_path).collect(),
        Command::Prefix(a) => a.system.iter().map(PathBuf::as_path).collect(),
        Command::Avoid(a) => vec![&a.forbidden],
        _ => vec![],
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Check(_) => "check",
        Command::Solve(_) => "solve",
        Command::Stream(_) => "stream",
        Command::Witness(_) => "witness",
        Command::Gw(_) => "gw",
        Command::Extract(_) => "extract",
        Command::Prefix(_) => "prefix",
        Command::Avoid(_) => "avoid",
        Command::Fireworks(_) => "fireworks",
        Command::Selftest(_) => "selftest",
    }
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Solve(a) => Some(a.seed),
        Command::Stream(a) => Some(a.seed),
        Command::Prefix(a) => Some(a.seed),
        Command::Avoid(a) => Some(a.seed),
        Command::Fireworks(a) => Some(a.seed),
        _ => None,
    }
}

fn manifest_for(command: &Command, argv: &[String], out: &Output) -> Result<RunManifest> {
    let subcommand = command_name(command).to_string();
    let mut argv = argv.to_vec();
    if let Some(seed) = seed_of(command) {
        if !argv.iter().any(|a| a == "--seed" || a.starts_with("--seed=")) {
            argv.extend(["--seed".to_string(), seed.to_string()]);
        }
    }
    let mut budgets = BTreeMap::new();
    let mut params = BTreeMap::new();
    let mut it = argv.iter().skip(1).peekable();
    while let Some(tok) = it.next() {
        let Some(flag) = tok.strip_prefix("--") else { continue };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match it.peek() {
                Some(v) if !v.starts_with("--") => (flag.to_string(), it.next().expect("peeked").clone()),
                _ => (flag.to_string(), "true".to_string()),
            },
        };
        if BUDGET_FLAGS.contains(&key.as_str()) {
            budgets.insert(key, value);
        } else if key != "seed" {
            params.insert(key, value);
        }
    }
    let inputs = input_paths(command)
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(InputRecord { path: p.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunManifest {
        tool: "lll".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand,
        argv,
        inputs,
        seed: seed_of(command),
        budgets,
        params,
        exit_code: out.code,
        stdout_sha256: sha256_hex(out.stdout.as_bytes()),
    })
}

/// Drops `--name <value>` (or `--name=<value>`) from an argument list.
fn strip_flag(argv: &[String], name: &str) -> Vec<String> {
    let (bare, joined) = (format!("--{name}"), format!("--{name}="));
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if *a == bare {
            skip = true;
        } else if !a.starts_with(&joined) {
            out.push(a.clone());
        }
    }
    out
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn replay(path: &Path, workers: Option<usize>) -> Output {
    let manifest: RunManifest = match read(path)
        .and_then(|t| serde_json::from_str(&t).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() }))
    {
        Ok(m) => m,
        Err(e) => return Output { code: 2, stdout: String::new(), stderr: format!("error: {e}\n") },
    };
    for input in &manifest.inputs {
        let now = std::fs::read(&input.path).map(|b| sha256_hex(&b)).unwrap_or_default();
        if now != input.sha256 {
            return Output {
                code: 1,
                stdout: String::new(),
                stderr: format!("error: input {} changed since the run\n", input.path),
            };
        }
    }
    let mut argv = manifest.argv.clone();
    if let Some(n) = workers {
        argv = strip_flag(&argv, "workers");
        argv.extend(["--workers".to_string(), n.to_string()]);
    }
    let mut out = run(&argv);
    let same = sha256_hex(out.stdout.as_bytes()) == manifest.stdout_sha256 && out.code == manifest.exit_code;
    writeln!(out.stdout, "replay={}", if same { "match" } else { "mismatch" }).ok();
    if !same {
        out.code = 1;
    }
    out
}

/// Parses `argv` (program name first) and runs the command.
pub fn run(argv: &[String]) -> Output {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output { code, stdout: text, stderr: String::new() }
            } else {
                Output { code, stdout: String::new(), stderr: text }
            };
        }
    };
    if let Some(path) = &cli.replay {
        return replay(path, cli.workers);
    }
    let Some(command) = &cli.command else {
        return Output { code: 2, stdout: String::new(), stderr: "error: missing subcommand\n".into() };
    };
    let mut stdout = String::new();
    let result = with_workers(cli.workers, || execute(command, &mut stdout));
    let mut out = match result {
        Ok(code) => Output { code, stdout, stderr: String::new() },
        Err(e) => Output { code: exit_code(&e), stdout, stderr: format!("error: {e}\n") },
    };
    if let Some(path) = &cli.manifest {
        let argv = strip_flag(argv, "manifest");
        let written = manifest_for(command, &argv, &out).and_then(|m| {
            let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Params(e.to_string()))?;
            std::fs::write(path, json).map_err(Error::from)
        });
        if let Err(e) = written {
            writeln!(out.stderr, "error: cannot write manifest: {e}").ok();
            out.code = out.code.max(2);
        }
    }
    out
}
