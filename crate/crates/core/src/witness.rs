//! Witness trees.
//!
//! The tree for step `k` is built by scanning the resampled events
//! backwards from step `k`: the root carries the event of step `k`; an
//! earlier event that shares a variable with some vertex becomes a child of
//! the deepest such vertex, otherwise it is skipped. Ties among the deepest
//! candidates go to the one met first in a breadth-first walk that visits
//! children in increasing label order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::One;

use crate::engine::ResampleLog;
use crate::error::{Error, Result};
use crate::model::ConstraintSystem;
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub id: usize,
    pub label: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Resampling step this vertex records, when built from a log.
    pub step: Option<usize>,
    children: Vec<usize>,
}

impl Vertex {
    pub fn children(&self) -> &[usize] {
        &self.children
    }
}

/// A rooted tree labeled by event indices; vertex 0 is the root.
#[derive(Clone, Debug)]
pub struct WitnessTree {
    vertices: Vec<Vertex>,
}

impl PartialEq for WitnessTree {
    /// Unordered labeled-tree equality.
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for WitnessTree {}

impl WitnessTree {
    pub fn singleton(label: usize) -> Self {
        WitnessTree { vertices: vec![Vertex { id: 0, label, parent: None, depth: 0, step: None, children: vec![] }] }
    }

    /// Adds a child and returns its id.
    pub fn add_child(&mut self, parent: usize, label: usize) -> usize {
        let id = self.vertices.len();
        let depth = self.vertices[parent].depth + 1;
        self.vertices.push(Vertex { id, label, parent: Some(parent), depth, step: None, children: vec![] });
        self.vertices[parent].children.push(id);
        id
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn root_label(&self) -> usize {
        self.vertices[0].label
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn depth(&self) -> usize {
        self.vertices.iter().map(|v| v.depth).max().unwrap_or(0)
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices.iter().map(|v| v.label)
    }

    pub fn label_count(&self, label: usize) -> usize {
        self.labels().filter(|&l| l == label).count()
    }

    /// Per label, how often it occurs.
    pub fn label_counts(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for l in self.labels() {
            *m.entry(l).or_insert(0) += 1;
        }
        m
    }

    fn canonical_from(&self, v: usize) -> String {
        let vert = &self.vertices[v];
        if vert.children.is_empty() {
            return vert.label.to_string();
        }
        let mut kids: Vec<String> = vert.children.iter().map(|&c| self.canonical_from(c)).collect();
        kids.sort();
        format!("{}({})", vert.label, kids.join(","))
    }

    /// Single-line form `label(child,child,...)` with children sorted, so
    /// that equal unordered trees print identically.
    pub fn canonical(&self) -> String {
        self.canonical_from(0)
    }

    pub fn parse_canonical(s: &str) -> Result<Self> {
        fn number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            std::str::from_utf8(&bytes[start..*pos])
                .ok()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Structural(format!("expected a label at offset {start}")))
        }
        fn subtree(tree: &mut WitnessTree, parent: usize, bytes: &[u8], pos: &mut usize) -> Result<()> {
            if *pos < bytes.len() && bytes[*pos] == b'(' {
                *pos += 1;
                loop {
                    let label = number(bytes, pos)?;
                    let child = tree.add_child(parent, label);
                    subtree(tree, child, bytes, pos)?;
                    match bytes.get(*pos) {
                        Some(b',') => *pos += 1,
                        Some(b')') => {
                            *pos += 1;
                            return Ok(());
                        }
                        _ => return Err(Error::Structural("unbalanced tree text".into())),
                    }
                }
            }
            Ok(())
        }
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bytes = compact.as_bytes();
        let mut pos = 0;
        let mut tree = WitnessTree::singleton(number(bytes, &mut pos)?);
        subtree(&mut tree, 0, bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(Error::Structural(format!("trailing text in tree {s:?}")));
        }
        Ok(tree)
    }

    /// One vertex per line, two spaces of indent per level, children in
    /// label order.
    pub fn render_indented(&self) -> String {
        fn go(t: &WitnessTree, v: usize, out: &mut String) {
            let vert = &t.vertices[v];
            let _ = write!(out, "{}{}", "  ".repeat(vert.depth), vert.label);
            if let Some(s) = vert.step {
                let _ = write!(out, " @{s}");
            }
            out.push('\n');
            let mut kids = vert.children.clone();
            kids.sort_by_key(|&c| (t.vertices[c].label, c));
            for c in kids {
                go(t, c, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }

    /// Labels on the path from the root to `v`.
    fn path_labels(&self, mut v: usize) -> Vec<usize> {
        let mut path = vec![self.vertices[v].label];
        while let Some(p) = self.vertices[v].parent {
            path.push(self.vertices[p].label);
            v = p;
        }
        path.reverse();
        path
    }
}

/// Tree for step `k` (1-based) of an event sequence.
pub fn build_from_events(events: &[usize], k: usize, system: &ConstraintSystem) -> Result<WitnessTree> {
    if k == 0 || k > events.len() {
        return Err(Error::IndexOutOfRange { index: k, len: events.len() });
    }
    for &e in &events[..k] {
        system.event(e)?;
    }
    let mut tree = WitnessTree::singleton(events[k - 1]);
    tree.vertices[0].step = Some(k);
    for s in (1..k).rev() {
        let label = events[s - 1];
        let mut best: Option<usize> = None;
        for v in &tree.vertices {
            if !system.are_neighbors(v.label, label) {
                continue;
            }
            best = match best {
                None => Some(v.id),
                Some(b) => {
                    let bd = tree.vertices[b].depth;
                    match v.depth.cmp(&bd) {
                        Ordering::Greater => Some(v.id),
                        Ordering::Less => Some(b),
                        Ordering::Equal => {
                            if tree.path_labels(v.id) < tree.path_labels(b) {
                                Some(v.id)
                            } else {
                                Some(b)
                            }
                        }
                    }
                }
            };
        }
        if let Some(parent) = best {
            let id = tree.add_child(parent, label);
            tree.vertices[id].step = Some(s);
        }
    }
    Ok(tree)
}

/// Tree for step `k` (1-based) of a run.
pub fn build_witness_tree(log: &ResampleLog, k: usize, system: &ConstraintSystem) -> Result<WitnessTree> {
    build_from_events(&log.events(), k, system)
}

/// One tree per step of an event sequence, checked to be pairwise distinct
/// and, per root label, strictly growing in the count of that label.
pub fn trees_for_events(events: &[usize], system: &ConstraintSystem) -> Result<Vec<WitnessTree>> {
    let trees = (1..=events.len()).map(|k| build_from_events(events, k, system)).collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    let mut last_count: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, t) in trees.iter().enumerate() {
        if !seen.insert(t.canonical()) {
            return Err(Error::Verification(format!("tree of step {} repeats an earlier tree", k + 1)));
        }
        let root = t.root_label();
        let c = t.label_count(root);
        if let Some(prev) = last_count.insert(root, c) {
            if c <= prev {
                return Err(Error::Verification(format!(
                    "tree of step {} does not grow the count of label {root}",
                    k + 1
                )));
            }
        }
    }
    Ok(trees)
}

pub fn trees_for_run(log: &ResampleLog, system: &ConstraintSystem) -> Result<Vec<WitnessTree>> {
    trees_for_events(&log.events(), system)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validation {
    pub violations: Vec<String>,
}

impl Validation {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks membership in the tree class (children are distinct, pairwise
/// disjoint neighbors of their parent) and the level property (vertices at
/// equal depth share no variables).
pub fn validate_tree(tree: &WitnessTree, system: &ConstraintSystem) -> Validation {
    let mut violations = Vec::new();
    let n = system.num_events();
    for v in &tree.vertices {
        if v.label >= n {
            violations.push(format!("vertex {} has unknown label {}", v.id, v.label));
        }
        match v.parent {
            None if v.id != 0 => violations.push(format!("vertex {} is detached", v.id)),
            Some(p) if p >= v.id => violations.push(format!("vertex {} has a later parent {p}", v.id)),
            Some(p) if tree.vertices[p].depth + 1 != v.depth => {
                violations.push(format!("vertex {} has inconsistent depth", v.id))
            }
            None if v.depth != 0 => violations.push("root depth is not 0".into()),
            _ => {}
        }
    }
    if !violations.is_empty() {
        return Validation { violations };
    }
    for v in &tree.vertices {
        for (a, &ca) in v.children.iter().enumerate() {
            let la = tree.vertices[ca].label;
            if !system.are_neighbors(v.label, la) {
                violations.push(format!("child {la} is not a neighbor of parent {}", v.label));
            }
            for &cb in &v.children[a + 1..] {
                let lb = tree.vertices[cb].label;
                if la == lb {
                    violations.push(format!("parent {} has two children labeled {la}", v.label));
                } else if system.are_neighbors(la, lb) {
                    violations.push(format!("siblings {la} and {lb} under {} are neighbors", v.label));
                }
            }
        }
    }
    let mut by_depth: BTreeMap<usize, Vec<&Vertex>> = BTreeMap::new();
    for v in &tree.vertices {
        by_depth.entry(v.depth).or_default().push(v);
    }
    for (d, level) in by_depth {
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a.parent != b.parent && system.are_neighbors(a.label, b.label) {
                    violations.push(format!("labels {} and {} share depth {d} but are neighbors", a.label, b.label));
                }
            }
        }
    }
    Validation { violations }
}

/// Tape positions a tree pins down.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TapePositions {
    /// For every vertex id: `(var, position)` of the value under which its
    /// event was true, i.e. the value the resampling replaced.
    pub evaluated: Vec<Vec<(usize, u64)>>,
    /// Per variable, the positions consumed by the tree's resamplings, in
    /// temporal order.
    pub consumed: BTreeMap<usize, Vec<u64>>,
}

/// Derives, from the tree alone, which tape entries its resamplings read.
///
/// A variable appears at most once per level and deeper vertices happened
/// earlier, so the resampling at vertex `v` saw the value at position
/// `c = #{deeper vertices using x}` and consumed position `c + 1`.
pub fn reconstruct_tape_positions(tree: &WitnessTree, system: &ConstraintSystem) -> Result<TapePositions> {
    let validation = validate_tree(tree, system);
    if !validation.valid() {
        return Err(Error::Structural(format!("invalid tree: {}", validation.violations.join("; "))));
    }
    let mut evaluated = Vec::with_capacity(tree.size());
    let mut consumed: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for v in &tree.vertices {
        let vbl = system.event(v.label)?.vbl();
        let mut row = Vec::with_capacity(vbl.len());
        for &x in vbl {
            let deeper = tree
                .vertices
                .iter()
                .filter(|u| u.depth > v.depth)
                .filter(|u| system.events()[u.label].vbl().binary_search(&x).is_ok())
                .count() as u64;
            row.push((x, deeper));
            consumed.entry(x).or_default().push(deeper + 1);
        }
        evaluated.push(row);
    }
    for list in consumed.values_mut() {
        list.sort_unstable();
    }
    Ok(TapePositions { evaluated, consumed })
}

/// Checks the reconstructed positions of a tree built from `log` against
/// the positions the run actually consumed.
pub fn check_positions_against_log(
    tree: &WitnessTree,
    positions: &TapePositions,
    log: &ResampleLog,
    system: &ConstraintSystem,
) -> Result<()> {
    for v in &tree.vertices {
        let step = v.step.ok_or_else(|| Error::Structural("tree does not record resampling steps".into()))?;
        let logged = &log.steps.get(step - 1).ok_or(Error::IndexOutOfRange { index: step, len: log.len() })?.draws;
        let derived = &positions.evaluated[v.id];
        if logged.len() != derived.len() {
            return Err(Error::Verification(format!("step {step}: variable sets differ")));
        }
        for (d, &(var, pos)) in logged.iter().zip(derived) {
            if d.var != var || d.position != pos + 1 {
                return Err(Error::Verification(format!(
                    "step {step}: variable {var} consumed position {} but the tree implies {}",
                    d.position,
                    pos + 1
                )));
            }
        }
    }
    let _ = system;
    Ok(())
}

/// Per variable, the values drawn during a run, indexed by tape position.
pub fn tape_table(log: &ResampleLog) -> Vec<Vec<u32>> {
    let mut table: Vec<Vec<u32>> = log.initial.iter().map(|d| vec![d.value]).collect();
    for step in &log.steps {
        for d in &step.draws {
            debug_assert_eq!(table[d.var].len() as u64, d.position);
            table[d.var].push(d.value);
        }
    }
    table
}

/// Whether every vertex's event holds on the tape entries the tree pins
/// down. When a tree appears, this must be the case.
pub fn tree_events_hold_on_tape(
    positions: &TapePositions,
    tree: &WitnessTree,
    table: &[Vec<u32>],
    system: &ConstraintSystem,
) -> bool {
    tree.vertices.iter().all(|v| {
        let row = &positions.evaluated[v.id];
        system.events()[v.label].holds_with(|x| {
            let pos = row.iter().find(|(var, _)| *var == x).map(|p| p.1).unwrap_or(0);
            table[x][pos as usize]
        })
    })
}

/// Product of `Pr[A_label]` over all vertices, with multiplicity.
pub fn tree_probability_bound(tree: &WitnessTree, system: &ConstraintSystem) -> Result<Rational> {
    let mut p = Rational::one();
    for l in tree.labels() {
        p *= system.event_probability(l)?;
    }
    Ok(p)
}
