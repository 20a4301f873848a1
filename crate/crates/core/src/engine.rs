//! The resampling algorithm.
//!
//! Start from independent draws of every variable; while some event is
//! true, take the true event with the smallest index and redraw its
//! variables (in increasing variable order) from the tape. Only events
//! touching redrawn variables are re-evaluated; the set of true events is
//! kept ordered so the minimum is available directly.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{EventFamily, PrefixCache};
use crate::model::ConstraintSystem;
use crate::tape::{Sampler, Tape};

/// One value taken from the tape: `x_var^position = value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub var: usize,
    pub position: u64,
    pub value: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based.
    pub number: usize,
    pub event: usize,
    pub draws: Vec<Draw>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleLog {
    pub initial: Vec<Draw>,
    pub steps: Vec<Step>,
}

impl ResampleLog {
    /// Event index of every step, in order.
    pub fn events(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.event).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Satisfied,
    BudgetExceeded,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Satisfied => "satisfied",
            RunStatus::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    pub assignment: Vec<u32>,
    pub log: ResampleLog,
    pub resample_count: usize,
    /// Event selected for the next resampling when the run stopped early:
    /// the step over budget, or the step whose draws ran off an explicit tape.
    pub pending: Option<usize>,
}

struct Runner<'a> {
    system: &'a ConstraintSystem,
    samplers: Vec<Sampler>,
    assignment: Vec<u32>,
    truth: Vec<bool>,
    true_set: BTreeSet<usize>,
    log: ResampleLog,
}

impl<'a> Runner<'a> {
    fn new(system: &'a ConstraintSystem) -> Self {
        // variables sharing a distribution share the sampler
        let mut samplers: Vec<Sampler> = Vec::with_capacity(system.num_variables());
        for (i, v) in system.variables().iter().enumerate() {
            let reuse = i > 0 && system.variables()[i - 1].distribution() == v.distribution();
            let s = if reuse { samplers[i - 1].clone() } else { Sampler::for_variable(v) };
            samplers.push(s);
        }
        Runner {
            system,
            samplers,
            assignment: Vec::with_capacity(system.num_variables()),
            truth: vec![false; system.num_events()],
            true_set: BTreeSet::new(),
            log: ResampleLog::default(),
        }
    }

    fn snapshot(&self, status: RunStatus, pending: Option<usize>) -> RunResult {
        RunResult {
            status,
            assignment: self.assignment.clone(),
            log: self.log.clone(),
            resample_count: self.log.steps.len(),
            pending,
        }
    }

    fn exhausted(&self, err: Error, pending: Option<usize>) -> Error {
        match err {
            Error::TapeExhausted { bits, .. } => Error::TapeExhausted {
                bits,
                partial: Some(Box::new(self.snapshot(RunStatus::BudgetExceeded, pending))),
            },
            other => other,
        }
    }

    fn run(mut self, tape: &mut Tape, max_steps: u64) -> Result<RunResult> {
        let system = self.system;
        for var in 0..system.num_variables() {
            let position = tape.consumed(var);
            let value = tape.draw(var, &self.samplers[var]).map_err(|e| self.exhausted(e, None))?;
            self.assignment.push(value);
            self.log.initial.push(Draw { var, position, value });
        }
        for (i, e) in system.events().iter().enumerate() {
            if e.holds(&self.assignment) {
                self.truth[i] = true;
                self.true_set.insert(i);
            }
        }
        let mut dirty: Vec<usize> = Vec::new();
        loop {
            let Some(&selected) = self.true_set.first() else {
                return Ok(self.snapshot(RunStatus::Satisfied, None));
            };
            if self.log.steps.len() as u64 >= max_steps {
                return Ok(self.snapshot(RunStatus::BudgetExceeded, Some(selected)));
            }
            let event = &system.events()[selected];
            let mut draws = Vec::with_capacity(event.vbl().len());
            for &var in event.vbl() {
                let position = tape.consumed(var);
                let value = match tape.draw(var, &self.samplers[var]) {
                    Ok(v) => v,
                    Err(e) => return Err(self.exhausted(e, Some(selected))),
                };
                self.assignment[var] = value;
                draws.push(Draw { var, position, value });
            }
            let number = self.log.steps.len() + 1;
            self.log.steps.push(Step { number, event: selected, draws });

            dirty.clear();
            for &var in event.vbl() {
                dirty.extend_from_slice(system.events_with_var(var));
            }
            dirty.sort_unstable();
            dirty.dedup();
            for &j in &dirty {
                let now = system.events()[j].holds(&self.assignment);
                if now != self.truth[j] {
                    self.truth[j] = now;
                    if now {
                        self.true_set.insert(j);
                    } else {
                        self.true_set.remove(&j);
                    }
                }
            }
        }
    }
}

/// Runs the algorithm on a finite system for at most `max_steps` resamplings.
///
/// An explicit tape that runs out yields [`Error::TapeExhausted`] carrying
/// the partial run.
pub fn run_finite(system: &ConstraintSystem, tape: &mut Tape, max_steps: u64) -> Result<RunResult> {
    Runner::new(system).run(tape, max_steps)
}

/// Runs on the first `active_k` events of a family; identical to
/// [`run_finite`] on the materialized prefix.
pub fn run_stream(cache: &mut PrefixCache<'_>, active_k: usize, tape: &mut Tape, max_steps: u64) -> Result<RunResult> {
    let system = cache.materialize(active_k)?;
    run_finite(&system, tape, max_steps)
}

/// Convenience wrapper of [`run_stream`] with a fresh cache.
pub fn run_family(family: &dyn EventFamily, active_k: usize, tape: &mut Tape, max_steps: u64) -> Result<RunResult> {
    run_stream(&mut PrefixCache::new(family), active_k, tape, max_steps)
}

/// Replays a log, checking that every step resampled a true event and
/// redrew exactly its variables. Calls `visit(step, assignment)` after the
/// initial draws (step 0) and after every step.
pub fn replay(log: &ResampleLog, system: &ConstraintSystem, mut visit: impl FnMut(usize, &[u32])) -> Result<Vec<u32>> {
    let mismatch = |msg: String| Error::Verification(format!("log does not match system: {msg}"));
    if log.initial.len() != system.num_variables() || log.initial.iter().enumerate().any(|(i, d)| d.var != i) {
        return Err(mismatch("initial draws do not cover the variables in order".into()));
    }
    let mut assignment: Vec<u32> = log.initial.iter().map(|d| d.value).collect();
    visit(0, &assignment);
    for (pos, step) in log.steps.iter().enumerate() {
        if step.number != pos + 1 {
            return Err(mismatch(format!("step numbers are not consecutive at {}", step.number)));
        }
        let event = system.events().get(step.event).ok_or_else(|| mismatch(format!("unknown event {}", step.event)))?;
        if !event.holds(&assignment) {
            return Err(mismatch(format!("event {} was false at step {}", step.event, step.number)));
        }
        if step.draws.len() != event.vbl().len() || step.draws.iter().zip(event.vbl()).any(|(d, v)| d.var != *v) {
            return Err(mismatch(format!("step {} redrew the wrong variables", step.number)));
        }
        for d in &step.draws {
            assignment[d.var] = d.value;
        }
        visit(step.number, &assignment);
    }
    Ok(assignment)
}

/// `T_k`: the first step after which events `0..k` are all false.
pub fn first_k_stable_time(log: &ResampleLog, system: &ConstraintSystem, k: usize) -> Result<Option<usize>> {
    if k > system.num_events() {
        return Err(Error::IndexOutOfRange { index: k, len: system.num_events() });
    }
    let mut found = None;
    replay(log, system, |step, assignment| {
        if found.is_none() && system.events()[..k].iter().all(|e| !e.holds(assignment)) {
            found = Some(step);
        }
    })?;
    Ok(found)
}

/// For every variable, the last step at which its value changed (0 if only
/// the initial draw set it).
pub fn last_change_steps(log: &ResampleLog, num_vars: usize) -> Vec<usize> {
    let mut current: Vec<u32> = log.initial.iter().map(|d| d.value).collect();
    current.resize(num_vars.max(current.len()), 0);
    let mut last = vec![0usize; current.len()];
    for step in &log.steps {
        for d in &step.draws {
            if current[d.var] != d.value {
                current[d.var] = d.value;
                last[d.var] = step.number;
            }
        }
    }
    last.truncate(num_vars);
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, VariableSpec};

    fn single_bit_event() -> ConstraintSystem {
        ConstraintSystem::new(vec![VariableSpec::bit(0)], vec![Event::new(0, vec![0], vec![vec![1]]).unwrap()]).unwrap()
    }

    /// Full rescan after every step.
    fn run_rescan(system: &ConstraintSystem, tape: &mut Tape, max_steps: u64) -> Result<RunResult> {
        let mut log = ResampleLog::default();
        let mut assignment = Vec::new();
        for v in system.variables() {
            let position = tape.consumed(v.index);
            let value = tape.fresh_value(v)?;
            assignment.push(value);
            log.initial.push(Draw { var: v.index, position, value });
        }
        loop {
            let first = system.events().iter().position(|e| e.holds(&assignment));
            let Some(sel) = first else {
                let n = log.steps.len();
                return Ok(RunResult {
                    status: RunStatus::Satisfied,
                    assignment,
                    log,
                    resample_count: n,
                    pending: None,
                });
            };
            if log.steps.len() as u64 >= max_steps {
                let n = log.steps.len();
                return Ok(RunResult {
                    status: RunStatus::BudgetExceeded,
                    assignment,
                    log,
                    resample_count: n,
                    pending: Some(sel),
                });
            }
            let mut draws = Vec::new();
            for &var in system.events()[sel].vbl() {
                let position = tape.consumed(var);
                let value = tape.fresh_value(&system.variables()[var])?;
                assignment[var] = value;
                draws.push(Draw { var, position, value });
            }
            let number = log.steps.len() + 1;
            log.steps.push(Step { number, event: sel, draws });
        }
    }

    #[test]
    fn zero_events_satisfied_immediately() {
        let sys = ConstraintSystem::new(vec![VariableSpec::bit(0), VariableSpec::bit(1)], vec![]).unwrap();
        let r = run_finite(&sys, &mut Tape::from_bit_str("10"), 10).unwrap();
        assert_eq!(r.status, RunStatus::Satisfied);
        assert_eq!(r.resample_count, 0);
        assert_eq!(r.assignment, vec![1, 0]);
    }

    #[test]
    fn hand_traces() {
        let sys = single_bit_event();
        let r = run_finite(&sys, &mut Tape::from_bit_str("10"), 10).unwrap();
        assert_eq!((r.status, r.resample_count, r.assignment.clone()), (RunStatus::Satisfied, 1, vec![0]));
        assert_eq!(first_k_stable_time(&r.log, &sys, 1).unwrap(), Some(1));
        assert_eq!(first_k_stable_time(&r.log, &sys, 0).unwrap(), Some(0));

        let r = run_finite(&sys, &mut Tape::from_bit_str("110"), 10).unwrap();
        assert_eq!(r.resample_count, 2);
        assert_eq!(r.log.steps[1].draws, vec![Draw { var: 0, position: 2, value: 0 }]);
    }

    #[test]
    fn exhaustion_carries_partial_run() {
        let sys = single_bit_event();
        match run_finite(&sys, &mut Tape::from_bit_str("11"), 10) {
            Err(Error::TapeExhausted { partial: Some(p), .. }) => {
                assert_eq!(p.resample_count, 1);
                assert_eq!(p.pending, Some(0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_budget() {
        let sys = single_bit_event();
        let r = run_finite(&sys, &mut Tape::from_bit_str("1"), 0).unwrap();
        assert_eq!(r.status, RunStatus::BudgetExceeded);
        assert!(r.log.is_empty());
        let r = run_finite(&sys, &mut Tape::from_bit_str("0"), 0).unwrap();
        assert_eq!(r.status, RunStatus::Satisfied);
    }

    #[test]
    fn dirty_set_matches_full_rescan() {
        use crate::rational::q;
        let vars = vec![
            VariableSpec::bit(0),
            VariableSpec::new(1, vec![q(1, 3), q(2, 3)]).unwrap(),
            VariableSpec::uniform(2, 3),
            VariableSpec::bit(3),
            VariableSpec::bit(4),
        ];
        let events = vec![
            Event::new(0, vec![0, 1], vec![vec![1, 1], vec![0, 0]]).unwrap(),
            Event::new(1, vec![1, 2], vec![vec![1, 2]]).unwrap(),
            Event::new(2, vec![2, 3, 4], vec![vec![0, 1, 1], vec![2, 0, 0]]).unwrap(),
            Event::new(3, vec![0, 4], vec![vec![1, 0]]).unwrap(),
        ];
        let sys = ConstraintSystem::new(vars, events).unwrap();
        for seed in 0..300 {
            let a = run_finite(&sys, &mut Tape::seeded(seed), 200).unwrap();
            let b = run_rescan(&sys, &mut Tape::seeded(seed), 200).unwrap();
            assert_eq!(a, b, "seed {seed}");
            replay(&a.log, &sys, |_, _| {}).unwrap();
        }
    }

    #[test]
    fn replay_detects_tampering() {
        let sys = single_bit_event();
        let mut r = run_finite(&sys, &mut Tape::from_bit_str("10"), 10).unwrap();
        r.log.initial[0].value = 0;
        assert!(first_k_stable_time(&r.log, &sys, 1).is_err());
    }

    #[test]
    fn last_changes() {
        let sys = single_bit_event();
        let r = run_finite(&sys, &mut Tape::from_bit_str("110"), 10).unwrap();
        assert_eq!(last_change_steps(&r.log, 1), vec![2]);
    }
}
