//! Variables, events and the local-lemma side conditions.
//!
//! Events are extensional: an [`Event`] lists the value tuples over its
//! variables that make it true. A [`ConstraintSystem`] owns the variables,
//! the events and the inverse incidence `variable -> events`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// A variable with range `0..n` and an exact distribution over it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub index: usize,
    distribution: Vec<Rational>,
}

impl VariableSpec {
    pub fn new(index: usize, distribution: Vec<Rational>) -> Result<Self> {
        if distribution.is_empty() {
            return Err(Error::Structural(format!("variable {index} has an empty range")));
        }
        if distribution.iter().any(|p| p < &Rational::zero()) {
            return Err(Error::Structural(format!("variable {index} has a negative probability")));
        }
        let total: Rational = distribution.iter().sum();
        if !total.is_one() {
            return Err(Error::Structural(format!(
                "variable {index}: distribution sums to {}, not 1",
                rational::fmt(&total)
            )));
        }
        Ok(VariableSpec { index, distribution })
    }

    pub fn uniform(index: usize, range: usize) -> Self {
        assert!(range >= 1);
        let p = rational::q(1, range as i64);
        VariableSpec { index, distribution: vec![p; range] }
    }

    pub fn bit(index: usize) -> Self {
        Self::uniform(index, 2)
    }

    pub fn range_size(&self) -> usize {
        self.distribution.len()
    }

    pub fn distribution(&self) -> &[Rational] {
        &self.distribution
    }

    pub fn probability(&self, value: u32) -> Rational {
        self.distribution.get(value as usize).cloned().unwrap_or_else(Rational::zero)
    }
}

/// An event: a set of forbidden value tuples over a sorted variable list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub index: usize,
    vbl: Vec<usize>,
    forbidden: Vec<Vec<u32>>,
}

impl Event {
    /// `vbl` must be strictly increasing and non-empty; every tuple must have
    /// one entry per variable. Duplicate tuples are rejected.
    pub fn new(index: usize, vbl: Vec<usize>, mut forbidden: Vec<Vec<u32>>) -> Result<Self> {
        if vbl.is_empty() {
            return Err(Error::Structural(format!("event {index} has no variables")));
        }
        if vbl.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural(format!(
                "event {index}: variables must be strictly increasing, got {vbl:?}"
            )));
        }
        if let Some(t) = forbidden.iter().find(|t| t.len() != vbl.len()) {
            return Err(Error::Structural(format!(
                "event {index}: tuple {t:?} does not match {} variables",
                vbl.len()
            )));
        }
        forbidden.sort();
        if forbidden.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Structural(format!("event {index}: duplicate forbidden tuple")));
        }
        Ok(Event { index, vbl, forbidden })
    }

    /// The event "clause is violated" for a disjunction of literals over
    /// binary variables; `(var, true)` is the positive literal. A clause
    /// with complementary literals can never be violated.
    pub fn clause(index: usize, literals: &[(usize, bool)]) -> Result<Self> {
        let mut lits: Vec<(usize, bool)> = literals.to_vec();
        lits.sort();
        lits.dedup();
        let tautology = lits.windows(2).any(|w| w[0].0 == w[1].0);
        let vbl: Vec<usize> = {
            let mut v: Vec<usize> = lits.iter().map(|l| l.0).collect();
            v.dedup();
            v
        };
        let forbidden =
            if tautology { Vec::new() } else { vec![lits.iter().map(|&(_, pos)| if pos { 0 } else { 1 }).collect()] };
        Event::new(index, vbl, forbidden)
    }

    pub fn vbl(&self) -> &[usize] {
        &self.vbl
    }

    pub fn forbidden(&self) -> &[Vec<u32>] {
        &self.forbidden
    }

    pub fn shares_variable(&self, other: &Event) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.vbl.len() && j < other.vbl.len() {
            match self.vbl[i].cmp(&other.vbl[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => return true,
            }
        }
        false
    }

    /// Whether the event holds when variable `v` has value `value(v)`.
    pub fn holds_with(&self, value: impl Fn(usize) -> u32) -> bool {
        self.forbidden
            .binary_search_by(|tuple| {
                for (slot, &var) in tuple.iter().zip(&self.vbl) {
                    match slot.cmp(&value(var)) {
                        Ordering::Equal => continue,
                        other => return other,
                    }
                }
                Ordering::Equal
            })
            .is_ok()
    }

    pub fn holds(&self, assignment: &[u32]) -> bool {
        self.holds_with(|v| assignment[v])
    }
}

/// Variables, events and the variable-to-events incidence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    variables: Vec<VariableSpec>,
    events: Vec<Event>,
    var_to_events: Vec<Vec<usize>>,
}

impl ConstraintSystem {
    /// Variables and events must be indexed by their position.
    pub fn new(variables: Vec<VariableSpec>, events: Vec<Event>) -> Result<Self> {
        for (pos, v) in variables.iter().enumerate() {
            if v.index != pos {
                return Err(Error::Structural(format!("variable at position {pos} carries index {}", v.index)));
            }
        }
        let mut var_to_events = vec![Vec::new(); variables.len()];
        for (pos, e) in events.iter().enumerate() {
            if e.index != pos {
                return Err(Error::Structural(format!("event at position {pos} carries index {}", e.index)));
            }
            for (slot, &var) in e.vbl.iter().enumerate() {
                let spec = variables
                    .get(var)
                    .ok_or_else(|| Error::Structural(format!("event {pos} uses unknown variable {var}")))?;
                if let Some(t) = e.forbidden.iter().find(|t| t[slot] as usize >= spec.range_size()) {
                    return Err(Error::Structural(format!(
                        "event {pos}: tuple {t:?} leaves the range of variable {var}"
                    )));
                }
                var_to_events[var].push(pos);
            }
        }
        Ok(ConstraintSystem { variables, events, var_to_events })
    }

    /// `n` uniform bits and the violation events of the given clauses.
    pub fn from_clauses(num_vars: usize, clauses: &[Vec<(usize, bool)>]) -> Result<Self> {
        let vars = (0..num_vars).map(VariableSpec::bit).collect();
        let events = clauses.iter().enumerate().map(|(i, c)| Event::clause(i, c)).collect::<Result<Vec<_>>>()?;
        ConstraintSystem::new(vars, events)
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn event(&self, i: usize) -> Result<&Event> {
        self.events.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.events.len() })
    }

    pub fn events_with_var(&self, var: usize) -> &[usize] {
        &self.var_to_events[var]
    }

    /// Exact `Pr[A_i]` under the product of the variable distributions.
    pub fn event_probability(&self, i: usize) -> Result<Rational> {
        let e = self.event(i)?;
        let mut total = Rational::zero();
        for tuple in &e.forbidden {
            let mut p = Rational::one();
            for (&var, &val) in e.vbl.iter().zip(tuple) {
                p *= self.variables[var].probability(val);
            }
            total += p;
        }
        Ok(total)
    }

    /// `N(A_i)`: events sharing a variable with `A_i`, including `i`.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        let e = self.event(i)?;
        let mut out: Vec<usize> = e.vbl.iter().flat_map(|&v| self.var_to_events[v].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        i == j || self.events[i].shares_variable(&self.events[j])
    }

    /// Indices of events that are true under `assignment`.
    pub fn violated(&self, assignment: &[u32]) -> Vec<usize> {
        self.events.iter().filter(|e| e.holds(assignment)).map(|e| e.index).collect()
    }

    /// First `k` events over the variables they need, re-indexed densely
    /// from zero. Variables keep their indices; the variable list is
    /// truncated to the largest one still in use.
    pub fn prefix(&self, k: usize) -> Result<ConstraintSystem> {
        let k = k.min(self.events.len());
        let events: Vec<Event> = self.events[..k].to_vec();
        let nvars = events.iter().filter_map(|e| e.vbl.last()).max().map_or(0, |m| m + 1);
        ConstraintSystem::new(self.variables[..nvars].to_vec(), events)
    }
}

/// Per-event LLL weights `z_i` and the strengthening factor `alpha`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LllParams {
    z: Vec<Rational>,
    alpha: Rational,
}

impl LllParams {
    pub fn new(z: Vec<Rational>, alpha: Rational) -> Result<Self> {
        if let Some((i, zi)) = z.iter().enumerate().find(|(_, zi)| **zi <= Rational::zero() || **zi >= Rational::one())
        {
            return Err(Error::Params(format!("z_{i} = {} is outside (0,1)", rational::fmt(zi))));
        }
        if alpha <= Rational::zero() || alpha > Rational::one() {
            return Err(Error::Params(format!("alpha = {} is outside (0,1]", rational::fmt(&alpha))));
        }
        Ok(LllParams { z, alpha })
    }

    pub fn uniform(count: usize, z: Rational, alpha: Rational) -> Result<Self> {
        LllParams::new(vec![z; count], alpha)
    }

    pub fn z(&self) -> &[Rational] {
        &self.z
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn with_alpha(&self, alpha: Rational) -> Result<Self> {
        LllParams::new(self.z.clone(), alpha)
    }

    /// `ceil(10 * sum z_i / (1 - z_i))`, the default step budget for a run.
    pub fn default_max_steps(&self) -> Result<u64> {
        let bound: Rational = self.z.iter().map(|z| z / (Rational::one() - z)).sum();
        rational::ceil_nat(&(bound * rational::int(10)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionEntry {
    pub event: usize,
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

/// Outcome of checking `Pr[A_i] <= factor * z_i * prod_{j in N(i), j != i} (1 - z_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionReport {
    pub factor: Rational,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| !e.holds)
    }
}

fn intern<'a>(z: &'a Rational, ids: &mut HashMap<&'a Rational, usize>, weights: &mut Vec<&'a Rational>) -> usize {
    *ids.entry(z).or_insert_with(|| {
        weights.push(z);
        weights.len() - 1
    })
}

fn check_with_factor(system: &ConstraintSystem, params: &LllParams, factor: Rational) -> Result<ConditionReport> {
    if params.len() != system.num_events() {
        return Err(Error::Params(format!("{} weights for {} events", params.len(), system.num_events())));
    }
    // products over neighbors depend only on how many neighbors carry each
    // weight, which repeats across translation-invariant systems
    let mut memo: HashMap<(usize, Vec<(usize, u32)>), Rational> = HashMap::new();
    let mut weight_ids: HashMap<&Rational, usize> = HashMap::new();
    let mut weights: Vec<&Rational> = Vec::new();
    let ids: Vec<usize> = params.z.iter().map(|z| intern(z, &mut weight_ids, &mut weights)).collect();
    let mut entries = Vec::with_capacity(system.num_events());
    for i in 0..system.num_events() {
        let lhs = system.event_probability(i)?;
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for j in system.neighbors(i)? {
            if j != i {
                *counts.entry(ids[j]).or_insert(0) += 1;
            }
        }
        let own = ids[i];
        let key = (own, counts.into_iter().collect::<Vec<_>>());
        let rhs = memo
            .entry(key)
            .or_insert_with_key(|(own, key)| {
                let product: Rational =
                    key.iter().map(|&(id, c)| rational::pow(&(Rational::one() - weights[id]), c)).product();
                &factor * weights[*own] * product
            })
            .clone();
        let holds = lhs <= rhs;
        entries.push(ConditionEntry { event: i, lhs, rhs, holds });
    }
    Ok(ConditionReport { factor, entries })
}

/// `prod_i (1 - z_i)`, the guaranteed avoidance mass when the condition
/// holds.
pub fn avoid_bound(params: &LllParams) -> Rational {
    let mut all: BTreeMap<&Rational, u32> = BTreeMap::new();
    for z in &params.z {
        *all.entry(z).or_insert(0) += 1;
    }
    all.into_iter().map(|(z, c)| rational::pow(&(Rational::one() - z), c)).product()
}

/// The finite condition (no `alpha` factor).
pub fn check_finite_lll(system: &ConstraintSystem, params: &LllParams) -> Result<ConditionReport> {
    check_with_factor(system, params, Rational::one())
}

/// The strengthened condition with factor `alpha < 1`, on a finite system or
/// a materialized prefix of a family.
pub fn check_computable_lll(system: &ConstraintSystem, params: &LllParams) -> Result<ConditionReport> {
    if params.alpha().is_one() {
        return Err(Error::Params("the strengthened condition needs alpha < 1".to_string()));
    }
    check_with_factor(system, params, params.alpha().clone())
}
