//! The Galton-Watson comparison process.
//!
//! Starting from a root label, every vertex labeled `i` independently grows
//! a son labeled `j` with probability `z_j` for each `j` in `N(i)`. The law
//! of the resulting tree bounds how likely a witness tree is to appear
//! during the resampling algorithm.

use std::collections::VecDeque;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::explore::{explore, ExploreBudget, TreeCheckReport, Verdict};
use crate::model::{check_computable_lll, check_finite_lll, ConditionReport, ConstraintSystem, LllParams};
use crate::rational::{self, Interval, Rational};
use crate::tape::Tape;
use crate::witness::{trees_for_events, validate_tree, WitnessTree};

/// Weights plus the root label the process starts from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GwParams {
    pub lll: LllParams,
    pub root: usize,
}

impl GwParams {
    pub fn new(lll: LllParams, root: usize) -> Result<Self> {
        if root >= lll.len() {
            return Err(Error::IndexOutOfRange { index: root, len: lll.len() });
        }
        Ok(GwParams { lll, root })
    }

    fn z(&self, j: usize) -> &Rational {
        &self.lll.z()[j]
    }
}

/// `z_i / (1 - z_i)`.
pub fn odds(z: &Rational) -> Rational {
    z / (Rational::one() - z)
}

/// Exact probability that the process started at `params.root` produces
/// exactly `tree`.
pub fn gw_tree_probability(tree: &WitnessTree, params: &GwParams, system: &ConstraintSystem) -> Result<Rational> {
    if params.lll.len() != system.num_events() {
        return Err(Error::Params(format!("{} weights for {} events", params.lll.len(), system.num_events())));
    }
    let v = validate_tree(tree, system);
    if !v.valid() {
        return Err(Error::Structural(format!("invalid tree: {}", v.violations.join("; "))));
    }
    if tree.root_label() != params.root {
        return Err(Error::Params(format!("tree root {} differs from {}", tree.root_label(), params.root)));
    }
    let mut p = Rational::one();
    for vert in tree.vertices() {
        let sons: Vec<usize> = vert.children().iter().map(|&c| tree.vertices()[c].label).collect();
        for j in system.neighbors(vert.label)? {
            if sons.contains(&j) {
                p *= params.z(j);
            } else {
                p *= Rational::one() - params.z(j);
            }
        }
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GwSample {
    Finite(WitnessTree),
    /// The process grew past the depth budget (or the vertex guard).
    Overflow {
        depth: usize,
        vertices: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SpawnOrder {
    #[default]
    Increasing,
    Decreasing,
}

pub const GW_VERTEX_GUARD: usize = 1 << 16;

/// Samples the process breadth first, drawing one coin per candidate son
/// from stream 0 of the tape.
pub fn gw_sample(
    params: &GwParams,
    system: &ConstraintSystem,
    tape: &mut Tape,
    depth_budget: usize,
) -> Result<GwSample> {
    gw_sample_ordered(params, system, tape, depth_budget, SpawnOrder::Increasing)
}

pub fn gw_sample_ordered(
    params: &GwParams,
    system: &ConstraintSystem,
    tape: &mut Tape,
    depth_budget: usize,
    order: SpawnOrder,
) -> Result<GwSample> {
    let mut tree = WitnessTree::singleton(params.root);
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let (label, depth) = {
            let vert = &tree.vertices()[v];
            (vert.label, vert.depth)
        };
        let mut candidates = system.neighbors(label)?;
        if order == SpawnOrder::Decreasing {
            candidates.reverse();
        }
        for j in candidates {
            if tape.bernoulli(0, params.z(j))? {
                if depth + 1 > depth_budget || tree.size() >= GW_VERTEX_GUARD {
                    return Ok(GwSample::Overflow { depth: depth + 1, vertices: tree.size() });
                }
                let c = tree.add_child(v, j);
                queue.push_back(c);
            }
        }
    }
    Ok(GwSample::Finite(tree))
}

/// All trees rooted at `root` with at most `max_size` vertices whose sons
/// are distinct, pairwise disjoint neighbors of their father and whose
/// levels contain no two neighbors.
pub fn enumerate_trees(system: &ConstraintSystem, root: usize, max_size: usize) -> Result<Vec<WitnessTree>> {
    system.event(root)?;
    let mut out = Vec::new();
    if max_size == 0 {
        return Ok(out);
    }
    let neighbors: Vec<Vec<usize>> = (0..system.num_events()).map(|i| system.neighbors(i)).collect::<Result<_>>()?;
    grow(system, &neighbors, WitnessTree::singleton(root), vec![0], max_size, &mut out);
    Ok(out)
}

fn grow(
    system: &ConstraintSystem,
    neighbors: &[Vec<usize>],
    tree: WitnessTree,
    frontier: Vec<usize>,
    max_size: usize,
    out: &mut Vec<WitnessTree>,
) {
    // every (parent, label) choice for the next level
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for &v in &frontier {
        for &j in &neighbors[tree.vertices()[v].label] {
            slots.push((v, j));
        }
    }
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    choose(system, neighbors, &tree, &slots, 0, &mut chosen, max_size, out);
}

#[allow(clippy::too_many_arguments)]
fn choose(
    system: &ConstraintSystem,
    neighbors: &[Vec<usize>],
    tree: &WitnessTree,
    slots: &[(usize, usize)],
    at: usize,
    chosen: &mut Vec<(usize, usize)>,
    max_size: usize,
    out: &mut Vec<WitnessTree>,
) {
    if at == slots.len() {
        if chosen.is_empty() {
            out.push(tree.clone());
            return;
        }
        let mut next = tree.clone();
        let frontier = chosen.iter().map(|&(p, j)| next.add_child(p, j)).collect();
        grow(system, neighbors, next, frontier, max_size, out);
        return;
    }
    choose(system, neighbors, tree, slots, at + 1, chosen, max_size, out);
    let (p, j) = slots[at];
    let fits = tree.size() + chosen.len() < max_size && chosen.iter().all(|&(_, l)| !system.are_neighbors(l, j));
    if fits {
        chosen.push((p, j));
        choose(system, neighbors, tree, slots, at + 1, chosen, max_size, out);
        chosen.pop();
    }
}

/// Sum of the process probabilities of all trees with at most `max_size`
/// vertices; never above 1 since the process produces one tree.
pub fn gw_tree_sum(system: &ConstraintSystem, params: &GwParams, max_size: usize) -> Result<Rational> {
    let mut total = Rational::zero();
    for t in enumerate_trees(system, params.root, max_size)? {
        total += gw_tree_probability(&t, params, system)?;
    }
    Ok(total)
}

/// `sum_{i<k} z_i / (1 - z_i)`.
pub fn expected_steps_bound(params: &LllParams, k: usize) -> Result<Rational> {
    if k > params.len() {
        return Err(Error::IndexOutOfRange { index: k, len: params.len() });
    }
    Ok(params.z()[..k].iter().map(odds).sum())
}

/// Probability that some tree with a given root and at least `min_size`
/// vertices appears, against `odds(z_root) * alpha^min_size`.
#[derive(Clone, Debug)]
pub struct TailCheck {
    pub root: usize,
    pub min_size: usize,
    pub p_mt: Interval,
    pub bound: Rational,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct MtVsGwReport {
    pub condition: ConditionReport,
    pub trees: TreeCheckReport,
    pub tails: Vec<TailCheck>,
    /// Per root, the process mass of all trees up to the size of the
    /// largest appearing tree.
    pub gw_sums: Vec<Rational>,
}

impl MtVsGwReport {
    pub fn certified(&self) -> bool {
        self.condition.holds()
            && self.trees.certified()
            && self.tails.iter().all(|t| t.verdict == Verdict::Certified)
            && self.gw_sums.iter().all(|s| s <= &Rational::one())
    }

    pub fn violations(&self) -> usize {
        self.trees.violations().count()
            + self.tails.iter().filter(|t| t.verdict == Verdict::Violated).count()
            + self.gw_sums.iter().filter(|s| *s > &Rational::one()).count()
    }
}

/// Exhaustive comparison of appearance probabilities with the process law:
/// `Pr[T appears] <= odds(z_root) * alpha^size(T) * Pr_GW[T]`.
///
/// With `alpha < 1` the strengthened condition is checked, otherwise the
/// plain one; the bound uses whatever `alpha` the parameters carry.
pub fn check_mt_vs_gw(
    system: &ConstraintSystem,
    params: &LllParams,
    budget: ExploreBudget,
    refine_bits: usize,
) -> Result<MtVsGwReport> {
    let condition =
        if params.alpha().is_one() { check_finite_lll(system, params)? } else { check_computable_lll(system, params)? };
    let mut exploration = explore(system, budget)?;
    let gw: Vec<GwParams> =
        (0..system.num_events()).map(|r| GwParams::new(params.clone(), r)).collect::<Result<_>>()?;
    let trees = TreeCheckReport::certify(&mut exploration, system, refine_bits, |t| {
        let r = t.root_label();
        Ok(odds(&params.z()[r])
            * rational::pow(params.alpha(), t.size() as u32)
            * gw_tree_probability(t, &gw[r], system)?)
    })?;

    let max_size = trees.checks.iter().map(|c| c.size).max().unwrap_or(0);
    let mut tails = Vec::new();
    let leaf_max: Vec<Vec<usize>> = exploration
        .leaves
        .iter()
        .map(|l| {
            let mut best = vec![0usize; system.num_events()];
            for t in trees_for_events(&l.committed_events(), system)? {
                let slot = &mut best[t.root_label()];
                *slot = (*slot).max(t.size());
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let unresolved = exploration.unresolved_mass();
    for root in 0..system.num_events() {
        for min_size in 1..=max_size {
            let mut lo = Rational::zero();
            let mut unresolved_seen = Rational::zero();
            for (leaf, best) in exploration.leaves.iter().zip(&leaf_max) {
                if best[root] >= min_size {
                    lo += leaf.weight();
                    if !leaf.resolved() {
                        unresolved_seen += leaf.weight();
                    }
                }
            }
            let hi = &lo + (&unresolved - unresolved_seen);
            let p_mt = Interval::new(lo, hi);
            let bound = odds(&params.z()[root]) * rational::pow(params.alpha(), min_size as u32);
            let verdict = Verdict::of(&p_mt, &bound);
            tails.push(TailCheck { root, min_size, p_mt, bound, verdict });
        }
    }

    let sum_size = max_size.clamp(1, 8);
    let gw_sums = gw.iter().map(|g| gw_tree_sum(system, g, sum_size)).collect::<Result<_>>()?;
    Ok(MtVsGwReport { condition, trees, tails, gw_sums })
}
