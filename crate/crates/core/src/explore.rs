//! Exhaustive exploration of coin-flip tapes.
//!
//! [`explore`] walks the binary tree of explicit tapes depth first, running
//! the engine on every prefix and extending a prefix only when the run asks
//! for more bits. Every leaf therefore has the exact weight `2^-len`. Runs
//! can be unbounded (an event that stays true keeps being resampled), so
//! leaves past the bit or step budget are kept as unresolved and their
//! weight is carried as an exact interval slack, never dropped.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::engine::{run_finite, RunStatus};
use crate::error::{Error, Result};
use crate::model::ConstraintSystem;
use crate::rational::{self, Interval, Rational};
use crate::tape::Tape;
use crate::witness::{trees_for_events, WitnessTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreBudget {
    pub max_bits: usize,
    pub max_steps: u64,
    pub max_leaves: usize,
}

impl Default for ExploreBudget {
    fn default() -> Self {
        ExploreBudget { max_bits: 20, max_steps: 10_000, max_leaves: 1 << 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafStatus {
    Satisfied,
    /// Still running at the step budget.
    StepLimit,
    /// Needed more bits than the bit budget allows.
    BitLimit,
}

#[derive(Clone, Debug)]
pub struct Leaf {
    pub bits: Vec<bool>,
    pub status: LeafStatus,
    /// Events resampled so far, in order.
    pub events: Vec<usize>,
    /// Event whose resampling was about to happen when the leaf stopped.
    pub pending: Option<usize>,
    /// Final assignment, or the partial one for unresolved leaves.
    pub assignment: Vec<u32>,
}

impl Leaf {
    pub fn weight(&self) -> Rational {
        rational::half_pow(self.bits.len() as u32)
    }

    pub fn resolved(&self) -> bool {
        self.status == LeafStatus::Satisfied
    }

    /// Resampled events plus the pending one, which is certain to follow.
    pub fn committed_events(&self) -> Vec<usize> {
        let mut ev = self.events.clone();
        ev.extend(self.pending);
        ev
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub leaves: Vec<Leaf>,
    pub budget: ExploreBudget,
}

impl Exploration {
    pub fn resolved_mass(&self) -> Rational {
        self.leaves.iter().filter(|l| l.resolved()).map(Leaf::weight).sum()
    }

    pub fn unresolved_mass(&self) -> Rational {
        self.leaves.iter().filter(|l| !l.resolved()).map(Leaf::weight).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.leaves.iter().all(Leaf::resolved)
    }

    /// Re-explores the leaves cut by the bit budget with a larger one.
    pub fn deepen(&mut self, system: &ConstraintSystem, max_bits: usize) -> Result<()> {
        if max_bits <= self.budget.max_bits {
            return Ok(());
        }
        self.budget.max_bits = max_bits;
        let (cut, mut kept): (Vec<Leaf>, Vec<Leaf>) =
            self.leaves.drain(..).partition(|l| l.status == LeafStatus::BitLimit);
        for leaf in cut {
            walk(system, &self.budget, leaf.bits, &mut kept)?;
        }
        kept.sort_by(|a, b| a.bits.cmp(&b.bits));
        self.leaves = kept;
        Ok(())
    }

    /// Exact interval for the probability that the run ends in an
    /// assignment satisfying `pred`.
    pub fn outcome_probability(&self, pred: impl Fn(&[u32]) -> bool) -> Interval {
        let lo: Rational = self.leaves.iter().filter(|l| l.resolved() && pred(&l.assignment)).map(Leaf::weight).sum();
        let hi = &lo + self.unresolved_mass();
        Interval::new(lo, hi)
    }

    /// Lower bound on the expected number of resamplings, counting only the
    /// steps each leaf has taken.
    pub fn expected_resamples_lower(&self) -> Rational {
        self.leaves.iter().map(|l| l.weight() * Rational::from_integer(l.events.len().into())).sum()
    }
}

fn walk(system: &ConstraintSystem, budget: &ExploreBudget, start: Vec<bool>, out: &mut Vec<Leaf>) -> Result<()> {
    let mut stack = vec![start];
    while let Some(bits) = stack.pop() {
        let mut tape = Tape::explicit(bits.clone());
        match run_finite(system, &mut tape, budget.max_steps) {
            Ok(r) => {
                let status = match r.status {
                    RunStatus::Satisfied => LeafStatus::Satisfied,
                    RunStatus::BudgetExceeded => LeafStatus::StepLimit,
                };
                debug_assert_eq!(tape.bits_used(), bits.len());
                out.push(Leaf { events: r.log.events(), pending: r.pending, assignment: r.assignment, status, bits });
            }
            Err(Error::TapeExhausted { partial, .. }) => {
                if bits.len() >= budget.max_bits {
                    let (events, pending, assignment) = match partial {
                        Some(p) => (p.log.events(), p.pending, p.assignment),
                        None => (vec![], None, vec![]),
                    };
                    out.push(Leaf { bits, status: LeafStatus::BitLimit, events, pending, assignment });
                } else {
                    let mut one = bits.clone();
                    one.push(true);
                    let mut zero = bits;
                    zero.push(false);
                    stack.push(one);
                    stack.push(zero);
                }
            }
            Err(e) => return Err(e),
        }
        if out.len() > budget.max_leaves {
            return Err(Error::Budget(format!(
                "exploration exceeds {} leaves at {} bits",
                budget.max_leaves, budget.max_bits
            )));
        }
    }
    Ok(())
}

/// Explores every tape up to the budget. Leaves come out in lexicographic
/// order of their bit strings and their weights sum to exactly 1.
pub fn explore(system: &ConstraintSystem, budget: ExploreBudget) -> Result<Exploration> {
    let mut leaves = Vec::new();
    walk(system, &budget, Vec::new(), &mut leaves)?;
    Ok(Exploration { leaves, budget })
}

/// How often a witness tree appears, as an exact interval.
#[derive(Clone, Debug)]
pub struct Appearance {
    pub tree: WitnessTree,
    /// Mass of leaves in which the tree has already appeared.
    pub lo: Rational,
    /// `lo` plus the mass of unresolved leaves that could still produce it.
    pub hi: Rational,
}

impl Appearance {
    pub fn resolved(&self) -> bool {
        self.lo == self.hi
    }
}

/// Every witness tree that appears in some leaf, keyed by canonical form.
///
/// A tree with root `r` built later in a run contains every resampling so
/// far of every neighbor of `r`, and strictly more resamplings of `r`. If
/// `r` is false once the committed resamplings are done, a neighbor other
/// than `r` must be resampled before `r` can become true again, so that
/// neighbor's count also grows. Unresolved leaves that fail these count
/// conditions can never produce `T`; all others count towards `hi`.
pub fn tree_appearances(exploration: &Exploration, system: &ConstraintSystem) -> Result<BTreeMap<String, Appearance>> {
    let per_leaf: Vec<Vec<WitnessTree>> = exploration
        .leaves
        .par_iter()
        .map(|l| trees_for_events(&l.committed_events(), system))
        .collect::<Result<_>>()?;

    let mut table: BTreeMap<String, Appearance> = BTreeMap::new();
    for (leaf, trees) in exploration.leaves.iter().zip(&per_leaf) {
        let w = leaf.weight();
        for t in trees {
            table
                .entry(t.canonical())
                .or_insert_with(|| Appearance { tree: t.clone(), lo: Rational::zero(), hi: Rational::zero() })
                .lo += &w;
        }
    }

    let neighbors: Vec<Vec<usize>> = (0..system.num_events()).map(|r| system.neighbors(r)).collect::<Result<_>>()?;
    // (root, counts over N(root), root certainly false) -> unresolved mass
    let mut groups: HashMap<(usize, Vec<usize>, bool), Rational> = HashMap::new();
    for leaf in exploration.leaves.iter().filter(|l| !l.resolved()) {
        let mut counts = vec![0usize; system.num_events()];
        for e in leaf.committed_events() {
            counts[e] += 1;
        }
        let complete = leaf.assignment.len() == system.num_variables();
        for (r, nb) in neighbors.iter().enumerate() {
            let untouched = leaf.pending.is_none_or(|p| !system.are_neighbors(p, r));
            let dormant = complete && untouched && !system.events()[r].holds(&leaf.assignment);
            let key = (r, nb.iter().map(|&l| counts[l]).collect(), dormant);
            *groups.entry(key).or_insert_with(Rational::zero) += leaf.weight();
        }
    }

    for app in table.values_mut() {
        let r = app.tree.root_label();
        let tcounts = app.tree.label_counts();
        let mut extra = Rational::zero();
        for ((root, counts, dormant), mass) in &groups {
            if *root != r {
                continue;
            }
            let mut some_neighbor_grows = false;
            let compatible = neighbors[r].iter().zip(counts).all(|(l, &c)| {
                let t = tcounts.get(l).copied().unwrap_or(0);
                if *l == r {
                    c < t
                } else {
                    some_neighbor_grows |= c < t;
                    c <= t
                }
            });
            if compatible && (some_neighbor_grows || !dormant) {
                extra += mass;
            }
        }
        app.hi = &app.lo + extra;
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The upper end of the interval is within the bound.
    Certified,
    /// The lower end already exceeds the bound.
    Violated,
    /// The interval straddles the bound; a larger budget is needed.
    Undetermined,
}

impl Verdict {
    pub fn of(p: &Interval, bound: &Rational) -> Self {
        if &p.hi <= bound {
            Verdict::Certified
        } else if &p.lo > bound {
            Verdict::Violated
        } else {
            Verdict::Undetermined
        }
    }
}

#[derive(Clone, Debug)]
pub struct TreeCheck {
    pub canonical: String,
    pub root: usize,
    pub size: usize,
    pub p_mt: Interval,
    pub bound: Rational,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct TreeCheckReport {
    pub checks: Vec<TreeCheck>,
    pub leaves: usize,
    pub unresolved_mass: Rational,
    /// Bit budget whose leaves defined the set of checked trees.
    pub base_bits: usize,
    /// Bit budget reached while refining undetermined intervals.
    pub final_bits: usize,
}

impl TreeCheckReport {
    pub fn violations(&self) -> impl Iterator<Item = &TreeCheck> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Violated)
    }

    pub fn undetermined(&self) -> impl Iterator<Item = &TreeCheck> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Undetermined)
    }

    /// Every checked tree is certified.
    pub fn certified(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Certified)
    }

    /// Checks every tree appearing at the current budget. Trees near the
    /// budget frontier can have intervals straddling a tight bound; those
    /// are narrowed by deepening the cut leaves one bit at a time, up to
    /// `refine_bits` extra bits. Trees that only show up while refining
    /// are not added to the checked set.
    pub(crate) fn certify(
        exploration: &mut Exploration,
        system: &ConstraintSystem,
        refine_bits: usize,
        bound: impl Fn(&WitnessTree) -> Result<Rational>,
    ) -> Result<Self> {
        let base_bits = exploration.budget.max_bits;
        let targets: Vec<(String, WitnessTree, Rational)> = tree_appearances(exploration, system)?
            .into_iter()
            .map(|(k, a)| {
                let b = bound(&a.tree)?;
                Ok((k, a.tree, b))
            })
            .collect::<Result<_>>()?;
        loop {
            let apps = tree_appearances(exploration, system)?;
            let checks: Vec<TreeCheck> = targets
                .iter()
                .map(|(canonical, tree, bound)| {
                    let a = &apps[canonical];
                    let p_mt = Interval::new(a.lo.clone(), a.hi.clone());
                    let verdict = Verdict::of(&p_mt, bound);
                    TreeCheck {
                        canonical: canonical.clone(),
                        root: tree.root_label(),
                        size: tree.size(),
                        p_mt,
                        bound: bound.clone(),
                        verdict,
                    }
                })
                .collect();
            let open = checks.iter().any(|c| c.verdict == Verdict::Undetermined);
            let final_bits = exploration.budget.max_bits;
            if !open || final_bits >= base_bits + refine_bits || exploration.is_complete() {
                return Ok(TreeCheckReport {
                    checks,
                    leaves: exploration.leaves.len(),
                    unresolved_mass: exploration.unresolved_mass(),
                    base_bits,
                    final_bits,
                });
            }
            exploration.deepen(system, final_bits + 1)?;
        }
    }
}

/// Checks `Pr[T appears] <= prod Pr[label]` for every tree appearing in the
/// exhaustive exploration.
pub fn check_tree_lemma(
    system: &ConstraintSystem,
    budget: ExploreBudget,
    refine_bits: usize,
) -> Result<TreeCheckReport> {
    let mut exploration = explore(system, budget)?;
    TreeCheckReport::certify(&mut exploration, system, refine_bits, |t| {
        crate::witness::tree_probability_bound(t, system)
    })
}

fn state_count(system: &ConstraintSystem) -> Option<usize> {
    system.variables().iter().try_fold(1usize, |acc, v| acc.checked_mul(v.range_size()))
}

/// Every full assignment with its product-measure probability.
pub fn all_assignments(system: &ConstraintSystem, guard: usize) -> Result<Vec<(Vec<u32>, Rational)>> {
    let n = state_count(system)
        .filter(|&n| n <= guard)
        .ok_or_else(|| Error::Budget(format!("assignment space exceeds the guard of {guard}")))?;
    let mut out = Vec::with_capacity(n);
    let mut current = vec![0u32; system.num_variables()];
    for _ in 0..n {
        let p = system.variables().iter().zip(&current).map(|(v, &x)| v.probability(x)).product();
        out.push((current.clone(), p));
        for (slot, v) in current.iter_mut().zip(system.variables()).rev() {
            *slot += 1;
            if (*slot as usize) < v.range_size() {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}

/// Probability, under the product measure, that no event holds.
pub fn avoiding_mass(system: &ConstraintSystem, guard: usize) -> Result<Rational> {
    Ok(all_assignments(system, guard)?.into_iter().filter(|(a, _)| system.violated(a).is_empty()).map(|(_, p)| p).sum())
}

/// Exact expected number of resamplings.
///
/// With the minimal-index rule the run is a Markov chain on assignments, so
/// the expectation solves a linear system, done here by exact elimination.
pub fn exact_expected_resamples(system: &ConstraintSystem, guard: usize) -> Result<Rational> {
    let states = all_assignments(system, guard)?;
    let index: HashMap<Vec<u32>, usize> = states.iter().enumerate().map(|(i, (a, _))| (a.clone(), i)).collect();
    let active: Vec<usize> = (0..states.len()).filter(|&i| !system.violated(&states[i].0).is_empty()).collect();
    let slot: HashMap<usize, usize> = active.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let n = active.len();
    // rows: E[a] - sum_b P(a,b) E[b] = 1
    let mut m = vec![vec![Rational::zero(); n + 1]; n];
    for (k, &i) in active.iter().enumerate() {
        let a = &states[i].0;
        let selected = system.violated(a)[0];
        let event = system.event(selected)?;
        m[k][k] += Rational::one();
        m[k][n] = Rational::one();
        let sub = ConstraintSystem::new(
            event
                .vbl()
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let mut spec = system.variables()[v].clone();
                    spec.index = j;
                    spec
                })
                .collect(),
            vec![],
        )?;
        for (tuple, p) in all_assignments(&sub, guard)? {
            let mut b = a.clone();
            for (&v, &x) in event.vbl().iter().zip(&tuple) {
                b[v] = x;
            }
            if let Some(&col) = slot.get(&index[&b]) {
                m[k][col] -= p;
            }
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or_else(|| Error::Verification("some state never reaches an avoiding assignment".into()))?;
        m.swap(col, pivot);
        let inv = Rational::one() / &m[col][col];
        for x in m[col].iter_mut() {
            *x *= &inv;
        }
        let prow = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= &f * p;
                }
            }
        }
    }
    Ok(active.iter().enumerate().map(|(k, &i)| &states[i].1 * &m[k][n]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, VariableSpec};
    use crate::rational::q;

    fn one_bit() -> ConstraintSystem {
        ConstraintSystem::new(vec![VariableSpec::bit(0)], vec![Event::new(0, vec![0], vec![vec![1]]).unwrap()]).unwrap()
    }

    #[test]
    fn chain_of_ones() {
        let sys = one_bit();
        let ex = explore(&sys, ExploreBudget { max_bits: 6, ..Default::default() }).unwrap();
        assert_eq!(ex.leaves.len(), 7);
        assert_eq!(ex.resolved_mass() + ex.unresolved_mass(), Rational::one());
        assert_eq!(ex.unresolved_mass(), q(1, 64));
        let apps = tree_appearances(&ex, &sys).unwrap();
        // a chain of s vertices needs s ones in a row
        for (s, canon) in ["0", "0(0)", "0(0(0))"].iter().enumerate() {
            let a = &apps[*canon];
            assert_eq!(a.lo, rational::half_pow(s as u32 + 1));
            assert!(a.resolved());
        }
    }

    #[test]
    fn deepening_matches_direct_exploration() {
        let sys =
            ConstraintSystem::from_clauses(3, &[vec![(0, true), (1, true)], vec![(1, false), (2, true)]]).unwrap();
        let mut a = explore(&sys, ExploreBudget { max_bits: 6, ..Default::default() }).unwrap();
        a.deepen(&sys, 10).unwrap();
        let b = explore(&sys, ExploreBudget { max_bits: 10, ..Default::default() }).unwrap();
        let bits = |e: &Exploration| e.leaves.iter().map(|l| l.bits.clone()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.unresolved_mass() < q(1, 4));
    }

    #[test]
    fn leaf_guard_refuses() {
        let sys = one_bit();
        let r = explore(&sys, ExploreBudget { max_bits: 30, max_steps: 100, max_leaves: 5 });
        assert!(matches!(r, Err(Error::Budget(_))));
    }

    #[test]
    fn expected_resamples_single_bit() {
        // geometric: E = sum_{s>=1} 2^-s = 1
        assert_eq!(exact_expected_resamples(&one_bit(), 1024).unwrap(), Rational::one());
        let ex = explore(&one_bit(), ExploreBudget { max_bits: 12, ..Default::default() }).unwrap();
        assert!(ex.expected_resamples_lower() < Rational::one());
        assert!(ex.expected_resamples_lower() > q(99, 100));
    }

    #[test]
    fn expected_resamples_biased_bit() {
        // x ~ (2/3, 1/3) forbidding 1: E = (1/3)/(2/3) = 1/2
        let sys = ConstraintSystem::new(
            vec![VariableSpec::new(0, vec![q(2, 3), q(1, 3)]).unwrap()],
            vec![Event::new(0, vec![0], vec![vec![1]]).unwrap()],
        )
        .unwrap();
        assert_eq!(exact_expected_resamples(&sys, 64).unwrap(), q(1, 2));
        let ex = explore(&sys, ExploreBudget { max_bits: 14, ..Default::default() }).unwrap();
        let i = ex.outcome_probability(|a| a[0] == 0);
        assert!(i.lo <= Rational::one() && i.hi >= Rational::one());
        assert!(i.width() < q(1, 50));
    }

    #[test]
    fn impossible_system_has_no_expectation() {
        let sys = ConstraintSystem::new(
            vec![VariableSpec::bit(0)],
            vec![Event::new(0, vec![0], vec![vec![0], vec![1]]).unwrap()],
        )
        .unwrap();
        assert!(exact_expected_resamples(&sys, 64).is_err());
    }

    #[test]
    fn lemma_on_single_bit_is_tight_and_certified() {
        let r = check_tree_lemma(&one_bit(), ExploreBudget { max_bits: 10, ..Default::default() }, 0).unwrap();
        assert_eq!(r.checks.len(), 10);
        assert!(r.certified());
        assert!(r.checks.iter().all(|c| c.p_mt.hi == c.bound));
    }

    #[test]
    fn verdicts() {
        let i = Interval::new(q(1, 4), q(1, 2));
        assert_eq!(Verdict::of(&i, &q(1, 2)), Verdict::Certified);
        assert_eq!(Verdict::of(&i, &q(1, 3)), Verdict::Undetermined);
        assert_eq!(Verdict::of(&i, &q(1, 5)), Verdict::Violated);
    }

    #[test]
    fn avoiding_mass_of_clause() {
        let sys = ConstraintSystem::from_clauses(3, &[vec![(0, true), (1, true), (2, true)]]).unwrap();
        assert_eq!(avoiding_mass(&sys, 64).unwrap(), q(7, 8));
        assert!(all_assignments(&sys, 4).is_err());
    }
}
