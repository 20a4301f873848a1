//! Effectively presented event families.
//!
//! A family hands out events by index and, for every variable, the finite
//! list of events that involve it. Finite [`ConstraintSystem`]s are
//! families too. [`PrefixCache`] materializes the first `k` events lazily.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_traits::One;

use crate::error::{Error, Result};
use crate::model::{ConstraintSystem, Event, LllParams, VariableSpec};
use crate::rational::Rational;

pub trait EventFamily {
    fn variable(&self, index: usize) -> Result<VariableSpec>;

    /// `Ok(None)` past the end of a finite family.
    fn event(&self, index: usize) -> Result<Option<Event>>;

    /// Increasing indices of every event involving `var`.
    fn events_with_var(&self, var: usize) -> Result<Vec<usize>>;

    /// Number of events, `None` when infinite.
    fn event_count(&self) -> Option<usize> {
        None
    }

    /// `N(A_j)` inside the family, `j` included.
    fn neighbors(&self, j: usize) -> Result<Vec<usize>> {
        let e = self.event(j)?.ok_or_else(|| Error::Family(format!("event {j} does not exist")))?;
        let mut out = BTreeSet::new();
        for &v in e.vbl() {
            out.extend(self.events_with_var(v)?);
        }
        Ok(out.into_iter().collect())
    }
}

impl EventFamily for ConstraintSystem {
    fn variable(&self, index: usize) -> Result<VariableSpec> {
        self.variables().get(index).cloned().ok_or(Error::IndexOutOfRange { index, len: self.num_variables() })
    }

    fn event(&self, index: usize) -> Result<Option<Event>> {
        Ok(self.events().get(index).cloned())
    }

    fn events_with_var(&self, var: usize) -> Result<Vec<usize>> {
        if var >= self.num_variables() {
            return Err(Error::IndexOutOfRange { index: var, len: self.num_variables() });
        }
        Ok(ConstraintSystem::events_with_var(self, var).to_vec())
    }

    fn event_count(&self) -> Option<usize> {
        Some(self.num_events())
    }
}

/// Events within graph distance `radius` of `center` in the neighbor graph.
/// Refused once more than `limit` events have been collected.
pub fn neighbor_ball(family: &dyn EventFamily, center: usize, radius: u64, limit: usize) -> Result<BTreeSet<usize>> {
    let mut seen = BTreeSet::from([center]);
    let mut frontier = VecDeque::from([(center, 0u64)]);
    while let Some((j, d)) = frontier.pop_front() {
        if d == radius {
            continue;
        }
        for nb in family.neighbors(j)? {
            if seen.insert(nb) {
                if seen.len() > limit {
                    return Err(Error::Family(format!(
                        "neighborhood ball of event {center} exceeds {limit} events at radius {radius}"
                    )));
                }
                frontier.push_back((nb, d + 1));
            }
        }
    }
    Ok(seen)
}

/// Lazily materialized prefix of a family.
pub struct PrefixCache<'f> {
    family: &'f dyn EventFamily,
    events: Vec<Event>,
    exhausted: bool,
}

impl<'f> PrefixCache<'f> {
    pub fn new(family: &'f dyn EventFamily) -> Self {
        PrefixCache { family, events: Vec::new(), exhausted: false }
    }

    pub fn family(&self) -> &'f dyn EventFamily {
        self.family
    }

    /// The first `k` events (fewer when the family is finite and shorter).
    pub fn events(&mut self, k: usize) -> Result<&[Event]> {
        while self.events.len() < k && !self.exhausted {
            let j = self.events.len();
            match self.family.event(j)? {
                Some(e) if e.index == j => self.events.push(e),
                Some(e) => return Err(Error::Family(format!("event {j} reports index {}", e.index))),
                None => self.exhausted = true,
            }
        }
        let k = k.min(self.events.len());
        Ok(&self.events[..k])
    }

    /// A finite system over the first `k` events and variables `0..=max`.
    pub fn materialize(&mut self, k: usize) -> Result<ConstraintSystem> {
        let family = self.family;
        let events = self.events(k)?.to_vec();
        let nvars = events.iter().filter_map(|e| e.vbl().last()).max().map_or(0, |m| m + 1);
        let vars = (0..nvars).map(|i| family.variable(i)).collect::<Result<Vec<_>>>()?;
        ConstraintSystem::new(vars, events)
    }
}

/// Per-event weights for a family: `z` as a function of the event, plus `alpha`.
#[derive(Clone)]
pub struct FamilyParams {
    alpha: Rational,
    z: Arc<dyn Fn(&Event) -> Rational + Send + Sync>,
}

impl fmt::Debug for FamilyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FamilyParams").field("alpha", &self.alpha).finish_non_exhaustive()
    }
}

impl FamilyParams {
    pub fn new(alpha: Rational, z: impl Fn(&Event) -> Rational + Send + Sync + 'static) -> Self {
        FamilyParams { alpha, z: Arc::new(z) }
    }

    pub fn constant(z: Rational, alpha: Rational) -> Self {
        FamilyParams::new(alpha, move |_| z.clone())
    }

    /// Weights of a finite system, looked up by event index.
    pub fn from_params(params: &LllParams) -> Self {
        let z = params.z().to_vec();
        FamilyParams::new(params.alpha().clone(), move |e| z[e.index].clone())
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn z(&self, e: &Event) -> Rational {
        (self.z)(e)
    }

    /// `z_j / (1 - z_j)`.
    pub fn odds(&self, e: &Event) -> Rational {
        let z = self.z(e);
        &z / (Rational::one() - &z)
    }

    pub fn to_lll(&self, events: &[Event]) -> Result<LllParams> {
        LllParams::new(events.iter().map(|e| self.z(e)).collect(), self.alpha.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> ConstraintSystem {
        let clauses: Vec<Vec<(usize, bool)>> = (0..n).map(|i| vec![(i, true), (i + 1, true)]).collect();
        ConstraintSystem::from_clauses(n + 1, &clauses).unwrap()
    }

    #[test]
    fn system_is_a_family() {
        let sys = chain(4);
        let fam: &dyn EventFamily = &sys;
        assert_eq!(fam.neighbors(1).unwrap(), vec![0, 1, 2]);
        assert_eq!(fam.event(9).unwrap(), None);
        assert_eq!(fam.event_count(), Some(4));
        assert!(fam.events_with_var(10).is_err());
    }

    #[test]
    fn balls_grow_by_radius() {
        let sys = chain(10);
        assert_eq!(neighbor_ball(&sys, 5, 0, 100).unwrap().len(), 1);
        assert_eq!(neighbor_ball(&sys, 5, 2, 100).unwrap(), (3..=7).collect());
        assert!(neighbor_ball(&sys, 5, 4, 3).is_err());
    }

    #[test]
    fn prefix_materialization() {
        let sys = chain(5);
        let mut cache = PrefixCache::new(&sys);
        let p = cache.materialize(2).unwrap();
        assert_eq!(p.num_events(), 2);
        assert_eq!(p.num_variables(), 3);
        assert_eq!(cache.materialize(2).unwrap(), p);
        assert_eq!(cache.materialize(50).unwrap().num_events(), 5);
        assert_eq!(p, sys.prefix(2).unwrap());
    }
}
