//! Stability horizons, exact output distributions and extraction of
//! computable branches.
//!
//! A cell is stable after step `N` with probability `1 - delta` when, for
//! every event `A_j` touching it, (a) with probability at least
//! `1 - delta'` the run has cleared the first `k` events by step `N`
//! (Markov's inequality on the expected-steps bound), and (b) every chain of
//! neighbors long enough to leave the first `k` events has probability at
//! most `delta'` to show up in a witness tree rooted at `A_j`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::engine::{last_change_steps, run_finite, RunStatus};
use crate::error::{Error, Result};
use crate::explore::{explore, Exploration, ExploreBudget};
use crate::family::{neighbor_ball, EventFamily, FamilyParams, PrefixCache};
use crate::model::ConstraintSystem;
use crate::rational::{self, Interval, Rational};
use crate::tape::{Tape, DEFAULT_ENUMERATION_GUARD};

/// Default cap on the neighborhood ball explored for a horizon.
pub const DEFAULT_BALL_LIMIT: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub event: usize,
    /// Radius of the neighborhood ball that must lie in the prefix.
    pub m: u32,
    /// Prefix size covering that ball.
    pub k: usize,
    /// Step count from Markov's inequality.
    pub t: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityCertificate {
    pub cell: usize,
    pub delta: Rational,
    pub horizon: u64,
    /// Share of `delta` given to each term of each event.
    pub delta_share: Rational,
    pub derivations: Vec<Derivation>,
}

impl StabilityCertificate {
    /// The derivation that fixes the horizon, if any.
    pub fn binding(&self) -> Option<&Derivation> {
        self.derivations.iter().max_by_key(|d| (d.t, std::cmp::Reverse(d.event)))
    }

    /// Largest prefix any derivation needs.
    pub fn prefix_needed(&self) -> usize {
        self.derivations.iter().map(|d| d.k).max().unwrap_or(0)
    }

    /// Re-checks every derivation with exact arithmetic.
    pub fn verify(&self, family: &dyn EventFamily, params: &FamilyParams) -> Result<bool> {
        if self.delta >= Rational::one() {
            return Ok(self.horizon == 0);
        }
        let mut cache = PrefixCache::new(family);
        let mut total = Rational::zero();
        for d in &self.derivations {
            let e = family.event(d.event)?.ok_or_else(|| Error::Family(format!("event {} does not exist", d.event)))?;
            let chain = params.odds(&e) * rational::pow(params.alpha(), d.m);
            let expected: Rational = cache.events(d.k)?.iter().map(|e| params.odds(e)).sum();
            let markov = if d.t == 0 {
                if expected.is_zero() {
                    Rational::zero()
                } else {
                    return Ok(false);
                }
            } else {
                expected / Rational::from_integer(d.t.into())
            };
            if chain > self.delta_share || markov > self.delta_share || d.t > self.horizon {
                return Ok(false);
            }
            total += chain + markov;
        }
        Ok(total <= self.delta)
    }
}

impl fmt::Display for StabilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, k) = self.binding().map_or((0, 0), |d| (d.m, d.k));
        write!(f, "cell={} delta={} N={} m={} k={}", self.cell, rational::fmt(&self.delta), self.horizon, m, k)
    }
}

/// Step count after which cell `cell` changes with probability at most
/// `delta`.
pub fn stability_horizon(
    family: &dyn EventFamily,
    params: &FamilyParams,
    cell: usize,
    delta: &Rational,
    ball_limit: usize,
) -> Result<StabilityCertificate> {
    if !delta.is_positive() {
        return Err(Error::Params("delta must be positive".into()));
    }
    if delta >= &Rational::one() {
        return Ok(StabilityCertificate {
            cell,
            delta: delta.clone(),
            horizon: 0,
            delta_share: delta.clone(),
            derivations: vec![],
        });
    }
    if params.alpha() >= &Rational::one() || !params.alpha().is_positive() {
        return Err(Error::Params("stability horizons need 0 < alpha < 1".into()));
    }
    family.variable(cell)?;
    let touching = family.events_with_var(cell)?;
    if touching.is_empty() {
        return Ok(StabilityCertificate {
            cell,
            delta: delta.clone(),
            horizon: 0,
            delta_share: delta.clone(),
            derivations: vec![],
        });
    }
    let share = delta / Rational::from_integer((2 * touching.len()).into());
    let mut cache = PrefixCache::new(family);
    let mut derivations = Vec::with_capacity(touching.len());
    for &j in &touching {
        let e = family.event(j)?.ok_or_else(|| Error::Family(format!("event {j} does not exist")))?;
        let odds = params.odds(&e);
        let mut m = 0u32;
        let mut term = odds;
        while term > share {
            m += 1;
            term *= params.alpha();
        }
        let ball = neighbor_ball(family, j, m.into(), ball_limit)?;
        let k = ball.last().map_or(0, |&x| x + 1);
        let prefix = cache.events(k)?;
        if prefix.len() < k {
            return Err(Error::Family(format!("family ends before event {}", k - 1)));
        }
        let expected: Rational = prefix.iter().map(|e| params.odds(e)).sum();
        let t = rational::ceil_nat(&(expected / &share))?;
        derivations.push(Derivation { event: j, m, k, t });
    }
    let horizon = derivations.iter().map(|d| d.t).max().unwrap_or(0);
    Ok(StabilityCertificate { cell, delta: delta.clone(), horizon, delta_share: share, derivations })
}

/// Interval for the probability that the final assignment starts with `u`.
#[derive(Clone, Debug)]
pub struct OutputApprox {
    pub interval: Interval,
    pub bits: usize,
    pub max_steps: u64,
}

/// Encloses `Pr[final assignment starts with u]` in an interval of width at
/// most `delta` by exhaustive exploration.
///
/// With weights the step limit is the Markov horizon for half of `delta`;
/// the bit budget then grows until the unresolved mass is below `delta`.
pub fn approx_output_distribution(
    system: &ConstraintSystem,
    params: Option<&FamilyParams>,
    u: &[u32],
    delta: &Rational,
    bit_guard: usize,
) -> Result<OutputApprox> {
    if u.len() > system.num_variables() {
        return Err(Error::IndexOutOfRange { index: u.len(), len: system.num_variables() });
    }
    if !delta.is_positive() {
        return Err(Error::Params("delta must be positive".into()));
    }
    let max_steps = match params {
        Some(p) => {
            let expected: Rational = system.events().iter().map(|e| p.odds(e)).sum();
            rational::ceil_nat(&(expected * Rational::from_integer(2.into()) / delta))?.max(1)
        }
        None => ExploreBudget::default().max_steps,
    };
    let mut exploration = explore(system, ExploreBudget { max_bits: 0, max_steps, ..Default::default() })?;
    output_interval(&mut exploration, system, u, delta, bit_guard)
}

fn output_interval(
    exploration: &mut Exploration,
    system: &ConstraintSystem,
    u: &[u32],
    delta: &Rational,
    bit_guard: usize,
) -> Result<OutputApprox> {
    loop {
        if &exploration.unresolved_mass() <= delta {
            let mut interval = exploration.outcome_probability(|a| a.starts_with(u));
            if interval.hi > Rational::one() {
                interval.hi = Rational::one();
            }
            return Ok(OutputApprox {
                interval,
                bits: exploration.budget.max_bits,
                max_steps: exploration.budget.max_steps,
            });
        }
        let next = exploration.budget.max_bits + 1;
        if next > bit_guard {
            return Err(Error::Budget(format!(
                "unresolved mass {} exceeds {} at the bit guard {bit_guard}",
                rational::fmt_with_decimal(&exploration.unresolved_mass()),
                rational::fmt(delta)
            )));
        }
        exploration.deepen(system, next)?;
    }
}

/// Lower approximations `q_n(u)` of a measure on sequences of cell values.
pub trait QOracle {
    /// Number of values of cell `index`.
    fn range(&self, index: usize) -> usize;

    /// Non-decreasing in `n`, converging to `q(u)`.
    fn lower(&mut self, u: &[u32], n: u32) -> Result<Rational>;
}

/// An eventually periodic sequence `prefix cycle cycle ...` with a mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub prefix: Vec<u32>,
    pub cycle: Vec<u32>,
    pub mass: Rational,
}

impl Atom {
    pub fn value(&self, i: usize) -> u32 {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn starts_with(&self, u: &[u32]) -> bool {
        u.iter().enumerate().all(|(i, &x)| self.value(i) == x)
    }
}

/// A finite mixture of atoms, approximated from below by
/// `q_n(u) = q(u) (1 - 2^-n)`.
#[derive(Clone, Debug)]
pub struct TableOracle {
    pub atoms: Vec<Atom>,
    pub cell_range: usize,
}

impl TableOracle {
    pub fn new(atoms: Vec<Atom>, cell_range: usize) -> Result<Self> {
        let total: Rational = atoms.iter().map(|a| a.mass.clone()).sum();
        if total > Rational::one() || atoms.iter().any(|a| a.mass.is_negative() || a.cycle.is_empty()) {
            return Err(Error::Params("atoms need non-empty cycles and total mass at most 1".into()));
        }
        if atoms.iter().any(|a| a.prefix.iter().chain(&a.cycle).any(|&v| v as usize >= cell_range)) {
            return Err(Error::Params("atom value outside the cell range".into()));
        }
        Ok(TableOracle { atoms, cell_range })
    }

    pub fn point(prefix: Vec<u32>, cycle: Vec<u32>) -> Self {
        TableOracle { atoms: vec![Atom { prefix, cycle, mass: Rational::one() }], cell_range: 2 }
    }

    pub fn exact(&self, u: &[u32]) -> Rational {
        self.atoms.iter().filter(|a| a.starts_with(u)).map(|a| a.mass.clone()).sum()
    }
}

impl QOracle for TableOracle {
    fn range(&self, _index: usize) -> usize {
        self.cell_range
    }

    fn lower(&mut self, u: &[u32], n: u32) -> Result<Rational> {
        Ok(self.exact(u) * (Rational::one() - rational::half_pow(n)))
    }
}

/// `q(u)` = probability that the final assignment of a finite system starts
/// with `u`; `q_n` is the resolved mass after exploring `n` bits.
pub struct MtOutputOracle<'s> {
    system: &'s ConstraintSystem,
    exploration: Exploration,
    bit_guard: usize,
}

impl<'s> MtOutputOracle<'s> {
    pub fn new(system: &'s ConstraintSystem, max_steps: u64, bit_guard: usize) -> Result<Self> {
        let exploration = explore(system, ExploreBudget { max_bits: 0, max_steps, ..Default::default() })?;
        Ok(MtOutputOracle { system, exploration, bit_guard })
    }

    pub fn exploration(&self) -> &Exploration {
        &self.exploration
    }
}

impl QOracle for MtOutputOracle<'_> {
    fn range(&self, index: usize) -> usize {
        self.system.variables().get(index).map_or(0, |v| v.range_size())
    }

    fn lower(&mut self, u: &[u32], n: u32) -> Result<Rational> {
        let bits = (n as usize).min(self.bit_guard);
        self.exploration.deepen(self.system, bits)?;
        Ok(self.exploration.outcome_probability(|a| a.starts_with(u)).lo)
    }
}

/// Values emitted by an extraction, with the lower bound of `q` that was
/// recorded for each extended prefix when it was emitted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub values: Vec<u32>,
    pub lower_bounds: Vec<Rational>,
}

/// Extends `w` by `cells` values, each time waiting for a son whose mass
/// provably exceeds `r`.
///
/// Valid when the branch through `w` has mass above `r` and `q(w) < 2r`:
/// then at most one son can exceed `r`. The second condition is checked
/// along the way; seeing two sons above `r`, or `q_n(w) >= 2r`, is a
/// contract violation.
pub fn extract_from_positive_probability(
    q: &mut dyn QOracle,
    r: &Rational,
    w: &[u32],
    cells: usize,
    max_rounds: u32,
) -> Result<Extraction> {
    if !r.is_positive() {
        return Err(Error::Params("r must be positive".into()));
    }
    let two_r = r * Rational::from_integer(2.into());
    let mut prefix = w.to_vec();
    let mut out = Extraction::default();
    for _ in 0..cells {
        let range = q.range(prefix.len());
        let mut emitted = None;
        for n in 1..=max_rounds {
            let father = q.lower(&prefix, n)?;
            if father >= two_r {
                return Err(Error::Contract(format!(
                    "q of the current prefix reached {} >= 2r",
                    rational::fmt(&father)
                )));
            }
            let mut above = Vec::new();
            for a in 0..range as u32 {
                prefix.push(a);
                let v = q.lower(&prefix, n)?;
                prefix.pop();
                if &v > r {
                    above.push((a, v));
                }
            }
            match above.len() {
                0 => continue,
                1 => {
                    emitted = above.pop();
                    break;
                }
                _ => return Err(Error::Contract("two sons exceed r".into())),
            }
        }
        let (a, v) = emitted.ok_or(Error::Timeout(max_rounds.into()))?;
        prefix.push(a);
        out.values.push(a);
        out.lower_bounds.push(v);
    }
    Ok(out)
}

/// Follows a branch of positive mass: at every cell, precision rounds go up
/// one at a time and sons are tried in value order within a round; the
/// first son with a positive lower bound is emitted.
pub fn extract_positive_branch(q: &mut dyn QOracle, cells: usize, max_rounds: u32) -> Result<Extraction> {
    let mut prefix = Vec::with_capacity(cells);
    let mut out = Extraction::default();
    for _ in 0..cells {
        let range = q.range(prefix.len());
        let mut emitted = None;
        'rounds: for n in 1..=max_rounds {
            for a in 0..range as u32 {
                prefix.push(a);
                let v = q.lower(&prefix, n)?;
                prefix.pop();
                if v.is_positive() {
                    emitted = Some((a, v));
                    break 'rounds;
                }
            }
        }
        let (a, v) = emitted.ok_or(Error::Timeout(max_rounds.into()))?;
        prefix.push(a);
        out.values.push(a);
        out.lower_bounds.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub enum PrefixMode {
    /// Extraction over the exactly explored output distribution of the
    /// first `events` events (all of them when `None`).
    Exact { events: Option<usize>, bit_guard: usize },
    /// Seeded runs up to the stability horizons, majority vote per cell.
    Empirical { trials: usize, seed: u64, delta: Rational },
}

#[derive(Clone, Debug)]
pub struct CellReport {
    pub cell: usize,
    pub value: u32,
    pub horizon: u64,
    /// Fraction of trials whose value at the horizon equals the final one.
    pub stable_fraction: Rational,
    /// Fraction of trials agreeing with the returned value.
    pub agreement: Rational,
}

#[derive(Clone, Debug)]
pub enum PrefixEvidence {
    /// Positive output mass of the prefix, a proof that it extends.
    Certified {
        lower_bound: Rational,
        bits: usize,
    },
    Report {
        cells: Vec<CellReport>,
        satisfied_trials: usize,
        trials: usize,
        fallback: bool,
    },
}

#[derive(Clone, Debug)]
pub struct PrefixOutcome {
    pub values: Vec<u32>,
    pub evidence: PrefixEvidence,
    /// Events whose variables all lie in the prefix; all false.
    pub decided_events: Vec<usize>,
}

/// Values of cells `0..len` of an assignment avoiding every event.
pub fn compute_assignment_prefix(
    family: &dyn EventFamily,
    params: &FamilyParams,
    len: usize,
    mode: &PrefixMode,
) -> Result<PrefixOutcome> {
    match mode {
        PrefixMode::Exact { events, bit_guard } => exact_prefix(family, params, len, *events, *bit_guard),
        PrefixMode::Empirical { trials, seed, delta } => empirical_prefix(family, params, len, *trials, *seed, delta),
    }
}

fn decided(system: &ConstraintSystem, len: usize) -> Vec<usize> {
    system.events().iter().filter(|e| e.vbl().last().is_none_or(|&v| v < len)).map(|e| e.index).collect()
}

fn check_decided(system: &ConstraintSystem, values: &[u32]) -> Result<Vec<usize>> {
    let ids = decided(system, values.len());
    if let Some(&bad) = ids.iter().find(|&&i| system.events()[i].holds_with(|v| values[v])) {
        return Err(Error::Verification(format!("event {bad} holds on the returned prefix")));
    }
    Ok(ids)
}

fn exact_prefix(
    family: &dyn EventFamily,
    params: &FamilyParams,
    len: usize,
    events: Option<usize>,
    bit_guard: usize,
) -> Result<PrefixOutcome> {
    let k = events
        .or(family.event_count())
        .ok_or_else(|| Error::Budget("exact mode needs a finite family or an explicit event prefix".into()))?;
    let mut cache = PrefixCache::new(family);
    let mut system = cache.materialize(k)?;
    if system.num_variables() < len {
        let vars = (0..len).map(|i| family.variable(i)).collect::<Result<Vec<_>>>()?;
        system = ConstraintSystem::new(vars, system.events().to_vec())?;
    }
    if len == 0 {
        return Ok(PrefixOutcome {
            values: vec![],
            evidence: PrefixEvidence::Certified { lower_bound: Rational::one(), bits: 0 },
            decided_events: decided(&system, 0),
        });
    }
    let lll = params.to_lll(system.events())?;
    let max_steps = lll.default_max_steps()?.max(1);
    let mut oracle = MtOutputOracle::new(&system, max_steps, bit_guard.min(DEFAULT_ENUMERATION_GUARD as usize))?;
    let ex = extract_positive_branch(&mut oracle, len, bit_guard as u32)?;
    let lower_bound = ex.lower_bounds.last().cloned().unwrap_or_else(Rational::one);
    let decided_events = check_decided(&system, &ex.values)?;
    Ok(PrefixOutcome {
        values: ex.values,
        evidence: PrefixEvidence::Certified { lower_bound, bits: oracle.exploration().budget.max_bits },
        decided_events,
    })
}

fn empirical_prefix(
    family: &dyn EventFamily,
    params: &FamilyParams,
    len: usize,
    trials: usize,
    seed: u64,
    delta: &Rational,
) -> Result<PrefixOutcome> {
    if trials == 0 {
        return Err(Error::Budget("empirical mode needs at least one trial".into()));
    }
    let certs = (0..len)
        .map(|i| stability_horizon(family, params, i, delta, DEFAULT_BALL_LIMIT))
        .collect::<Result<Vec<_>>>()?;
    let k = certs.iter().map(StabilityCertificate::prefix_needed).max().unwrap_or(0);
    let mut cache = PrefixCache::new(family);
    let mut system = cache.materialize(k)?;
    if system.num_variables() < len {
        let vars = (0..len).map(|i| family.variable(i)).collect::<Result<Vec<_>>>()?;
        system = ConstraintSystem::new(vars, system.events().to_vec())?;
    }
    let lll = params.to_lll(system.events())?;
    let max_steps = lll.default_max_steps()?.max(certs.iter().map(|c| c.horizon).max().unwrap_or(0));
    let horizons: Vec<u64> = certs.iter().map(|c| c.horizon).collect();

    struct Trial {
        satisfied: bool,
        finals: Vec<u32>,
        stable: Vec<bool>,
    }
    let runs: Vec<Trial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let r = run_finite(&system, &mut Tape::seeded(seed.wrapping_add(t)), max_steps)?;
            let last = last_change_steps(&r.log, system.num_variables());
            Ok(Trial {
                satisfied: r.status == RunStatus::Satisfied,
                finals: r.assignment[..len].to_vec(),
                stable: (0..len).map(|i| last[i] as u64 <= horizons[i]).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let satisfied: Vec<&Trial> = runs.iter().filter(|t| t.satisfied).collect();
    if satisfied.is_empty() {
        return Err(Error::Budget(format!("none of {trials} trials finished within {max_steps} steps")));
    }
    let mut values = Vec::with_capacity(len);
    let mut cells = Vec::with_capacity(len);
    for (i, &horizon) in horizons.iter().enumerate().take(len) {
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for t in &satisfied {
            *votes.entry(t.finals[i]).or_insert(0) += 1;
        }
        let (&value, &count) = votes.iter().max_by_key(|(v, c)| (**c, std::cmp::Reverse(**v))).expect("non-empty");
        values.push(value);
        let stable = runs.iter().filter(|t| t.stable[i]).count();
        cells.push(CellReport {
            cell: i,
            value,
            horizon,
            stable_fraction: Rational::new(stable.into(), runs.len().into()),
            agreement: Rational::new(count.into(), satisfied.len().into()),
        });
    }
    let mut fallback = false;
    if check_decided(&system, &values).is_err() {
        // the vote mixes trials; fall back to the closest finished trial
        fallback = true;
        let best = satisfied
            .iter()
            .min_by_key(|t| t.finals.iter().zip(&values).filter(|(a, b)| a != b).count())
            .expect("non-empty");
        values = best.finals.clone();
        for (c, &v) in cells.iter_mut().zip(&values) {
            c.value = v;
        }
    }
    let decided_events = check_decided(&system, &values)?;
    Ok(PrefixOutcome {
        values,
        evidence: PrefixEvidence::Report { cells, satisfied_trials: satisfied.len(), trials, fallback },
        decided_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::single_bit;
    use crate::model::{Event, VariableSpec};
    use crate::rational::q;

    #[test]
    fn chain_radius_matches_hand_solution() {
        // z = 1/3 gives odds 1/2; alpha = 1/2; share 1/16 -> m = 3
        let clauses: Vec<Vec<(usize, bool)>> = (0..10).map(|i| vec![(i, true)]).collect();
        let sys = ConstraintSystem::from_clauses(10, &clauses).unwrap();
        let params = FamilyParams::constant(q(1, 3), q(1, 2));
        let c = stability_horizon(&sys, &params, 4, &q(1, 8), 100).unwrap();
        assert_eq!(c.delta_share, q(1, 16));
        assert_eq!(c.derivations[0].m, 3);
        // isolated events: the ball is the event itself
        assert_eq!(c.derivations[0].k, 5);
        // sum of 5 odds is 5/2, divided by 1/16
        assert_eq!(c.horizon, 40);
        assert!(c.verify(&sys, &params).unwrap());
        assert_eq!(c.to_string(), "cell=4 delta=1/8 N=40 m=3 k=5");
    }

    #[test]
    fn vacuous_delta_and_bad_alpha() {
        let sys = single_bit();
        let c = stability_horizon(&sys, &FamilyParams::constant(q(1, 2), q(1, 2)), 0, &q(1, 1), 10).unwrap();
        assert_eq!(c.horizon, 0);
        assert!(stability_horizon(&sys, &FamilyParams::constant(q(1, 2), q(1, 1)), 0, &q(1, 2), 10).is_err());
    }

    #[test]
    fn output_of_unconstrained_bit() {
        let sys = ConstraintSystem::new(vec![VariableSpec::bit(0)], vec![]).unwrap();
        let a = approx_output_distribution(&sys, None, &[0], &q(1, 100), 20).unwrap();
        assert_eq!(a.interval, Interval::point(q(1, 2)));
        assert!(approx_output_distribution(&sys, None, &[0, 0], &q(1, 100), 20).is_err());
    }

    #[test]
    fn output_of_single_event() {
        let sys = single_bit();
        let params = FamilyParams::constant(q(1, 2), q(1, 2));
        for d in [q(1, 4), q(1, 64)] {
            let a = approx_output_distribution(&sys, Some(&params), &[0], &d, 20).unwrap();
            assert!(a.interval.lo >= Rational::one() - &d);
            assert_eq!(a.interval.hi, Rational::one());
            assert!(a.interval.width() <= d);
        }
        let never = approx_output_distribution(&sys, None, &[1], &q(1, 64), 20).unwrap();
        assert!(never.interval.lo.is_zero());
    }

    #[test]
    fn table_extraction() {
        let mut point = TableOracle::point(vec![], vec![0, 1]);
        let ex = extract_from_positive_probability(&mut point, &q(3, 5), &[], 6, 20).unwrap();
        assert_eq!(ex.values, vec![0, 1, 0, 1, 0, 1]);
        let mut point = TableOracle::point(vec![], vec![0, 1]);
        assert_eq!(extract_positive_branch(&mut point, 6, 20).unwrap().values, vec![0, 1, 0, 1, 0, 1]);

        let two = || {
            TableOracle::new(
                vec![
                    Atom { prefix: vec![], cycle: vec![1], mass: q(3, 5) },
                    Atom { prefix: vec![], cycle: vec![0], mass: q(2, 5) },
                ],
                2,
            )
            .unwrap()
        };
        let ex = extract_from_positive_probability(&mut two(), &q(2, 5), &[1], 5, 20).unwrap();
        assert_eq!(ex.values, vec![1; 5]);
        assert!(matches!(
            extract_from_positive_probability(&mut two(), &q(1, 10), &[], 3, 20),
            Err(Error::Contract(_))
        ));
        assert_eq!(extract_positive_branch(&mut two(), 4, 20).unwrap().values, vec![0; 4]);
    }

    #[test]
    fn stalled_extraction_times_out() {
        let mut empty = TableOracle::new(vec![], 2).unwrap();
        assert!(matches!(extract_positive_branch(&mut empty, 1, 5), Err(Error::Timeout(5))));
    }

    #[test]
    fn exact_prefix_of_single_event() {
        let sys = single_bit();
        let params = FamilyParams::constant(q(1, 2), q(1, 2));
        let mode = PrefixMode::Exact { events: None, bit_guard: 20 };
        let out = compute_assignment_prefix(&sys, &params, 1, &mode).unwrap();
        assert_eq!(out.values, vec![0]);
        assert_eq!(out.decided_events, vec![0]);
        match out.evidence {
            PrefixEvidence::Certified { lower_bound, .. } => assert!(lower_bound.is_positive()),
            other => panic!("{other:?}"),
        }
        let empty = compute_assignment_prefix(&sys, &params, 0, &mode).unwrap();
        assert!(empty.values.is_empty());
    }

    #[test]
    fn exact_prefix_without_events_is_all_zeros() {
        let sys = ConstraintSystem::new((0..4).map(VariableSpec::bit).collect(), vec![]).unwrap();
        let params = FamilyParams::constant(q(1, 2), q(1, 2));
        let out =
            compute_assignment_prefix(&sys, &params, 4, &PrefixMode::Exact { events: None, bit_guard: 20 }).unwrap();
        assert_eq!(out.values, vec![0; 4]);
    }

    #[test]
    fn empirical_prefix_avoids_decided_events() {
        let vars = (0..6).map(VariableSpec::bit).collect();
        let events = (0..5).map(|i| Event::new(i, vec![i, i + 1], vec![vec![1, 1], vec![0, 0]]).unwrap()).collect();
        let sys = ConstraintSystem::new(vars, events).unwrap();
        let params = FamilyParams::constant(q(1, 2), q(1, 2));
        let mode = PrefixMode::Empirical { trials: 64, seed: 7, delta: q(1, 4) };
        let out = compute_assignment_prefix(&sys, &params, 6, &mode).unwrap();
        for w in out.values.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        assert!(compute_assignment_prefix(
            &sys,
            &params,
            6,
            &PrefixMode::Empirical { trials: 0, seed: 0, delta: q(1, 4) }
        )
        .is_err());
    }
}
