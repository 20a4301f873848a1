//! Readers and writers for constraint systems.
//!
//! Two inputs are supported: DIMACS CNF (clauses over uniform bits, variable
//! `v` of the file becomes index `v - 1`) and a line-oriented text format
//! for general systems:
//!
//! ```text
//! # comment
//! var 0 2 1/2 1/2
//! var 1 3 1/3 1/3 1/3
//! event 0 vbl 0 1 forbid 1 2;0 0
//! z 0 1/2
//! alpha 99/100
//! ```
//!
//! `z` and `alpha` lines are optional; when any `z` is present every event
//! needs one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::One;

use crate::error::{Error, Result};
use crate::model::{ConstraintSystem, Event, LllParams, VariableSpec};
use crate::rational::{self, Rational};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses DIMACS CNF text. Each clause becomes the event "clause violated".
pub fn parse_dimacs(text: &str) -> Result<ConstraintSystem> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<(usize, bool)>> = Vec::new();
    let mut current: Vec<(usize, bool)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(perr(line_no, format!("bad problem line {line:?}")));
            }
            let nv = parts[2].parse().map_err(|_| perr(line_no, "bad variable count"))?;
            let nc = parts[3].parse().map_err(|_| perr(line_no, "bad clause count"))?;
            header = Some((nv, nc));
            continue;
        }
        let (nvars, _) = header.ok_or_else(|| perr(line_no, "clause before problem line"))?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| perr(line_no, format!("bad literal {tok:?}")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(perr(line_no, "empty clause"));
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            let var = lit.unsigned_abs() as usize;
            if var > nvars {
                return Err(perr(line_no, format!("literal {lit} exceeds {nvars} variables")));
            }
            current.push((var - 1, lit > 0));
        }
    }
    let (nvars, nclauses) = header.ok_or_else(|| perr(0, "missing problem line"))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != nclauses {
        return Err(perr(0, format!("header announces {nclauses} clauses, found {}", clauses.len())));
    }
    ConstraintSystem::from_clauses(nvars, &clauses)
}

pub fn write_dimacs(num_vars: usize, clauses: &[Vec<(usize, bool)>]) -> String {
    let mut out = format!("p cnf {num_vars} {}\n", clauses.len());
    for c in clauses {
        for &(v, pos) in c {
            let lit = v as i64 + 1;
            let _ = write!(out, "{} ", if pos { lit } else { -lit });
        }
        out.push_str("0\n");
    }
    out
}

/// A system plus optional weights read from the text format.
#[derive(Clone, Debug)]
pub struct SystemFile {
    pub system: ConstraintSystem,
    pub params: Option<LllParams>,
}

pub fn parse_system(text: &str) -> Result<SystemFile> {
    let mut vars: BTreeMap<usize, VariableSpec> = BTreeMap::new();
    let mut events: BTreeMap<usize, Event> = BTreeMap::new();
    let mut z: BTreeMap<usize, Rational> = BTreeMap::new();
    let mut alpha: Option<Rational> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let kind = toks.next().unwrap_or_default();
        let idx = |t: Option<&str>| -> Result<usize> {
            t.ok_or_else(|| perr(line_no, "missing index"))?.parse().map_err(|_| perr(line_no, "bad index"))
        };
        let rat = |t: &str| rational::parse(t).map_err(|e| perr(line_no, e.to_string()));
        match kind {
            "var" => {
                let i = idx(toks.next())?;
                let n = idx(toks.next())?;
                let probs = toks.map(rat).collect::<Result<Vec<_>>>()?;
                if probs.len() != n {
                    return Err(perr(line_no, format!("range {n} but {} probabilities", probs.len())));
                }
                let spec = VariableSpec::new(i, probs).map_err(|e| perr(line_no, e.to_string()))?;
                if vars.insert(i, spec).is_some() {
                    return Err(perr(line_no, format!("variable {i} defined twice")));
                }
            }
            "event" => {
                let i = idx(toks.next())?;
                let rest: Vec<&str> = toks.collect();
                if rest.first() != Some(&"vbl") {
                    return Err(perr(line_no, "expected `vbl`"));
                }
                let split =
                    rest.iter().position(|t| *t == "forbid").ok_or_else(|| perr(line_no, "expected `forbid`"))?;
                let vbl = rest[1..split]
                    .iter()
                    .map(|t| t.parse().map_err(|_| perr(line_no, format!("bad variable {t:?}"))))
                    .collect::<Result<Vec<usize>>>()?;
                let tuples_text = rest[split + 1..].join(" ");
                let mut forbidden = Vec::new();
                for chunk in tuples_text.split(';') {
                    let chunk = chunk.trim();
                    if chunk.is_empty() {
                        continue;
                    }
                    let tuple = chunk
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| perr(line_no, format!("bad value {t:?}"))))
                        .collect::<Result<Vec<u32>>>()?;
                    forbidden.push(tuple);
                }
                let e = Event::new(i, vbl, forbidden).map_err(|e| perr(line_no, e.to_string()))?;
                for (slot, v) in e.vbl().iter().enumerate() {
                    let Some(spec) = vars.get(v) else { continue };
                    if e.forbidden().iter().any(|t| t[slot] as usize >= spec.range_size()) {
                        return Err(perr(line_no, format!("value out of range for variable {v}")));
                    }
                }
                if events.insert(i, e).is_some() {
                    return Err(perr(line_no, format!("event {i} defined twice")));
                }
            }
            "z" => {
                let i = idx(toks.next())?;
                let v = rat(toks.next().ok_or_else(|| perr(line_no, "missing weight"))?)?;
                z.insert(i, v);
            }
            "alpha" => {
                alpha = Some(rat(toks.next().ok_or_else(|| perr(line_no, "missing alpha"))?)?);
            }
            other => return Err(perr(line_no, format!("unknown record {other:?}"))),
        }
    }
    let dense = |keys: Vec<usize>, what: &str| -> Result<()> {
        match keys.iter().enumerate().find(|(pos, k)| *pos != **k) {
            Some((pos, _)) => Err(perr(0, format!("{what} indices must be 0..n, {what} {pos} missing"))),
            None => Ok(()),
        }
    };
    dense(vars.keys().copied().collect(), "variable")?;
    dense(events.keys().copied().collect(), "event")?;
    let system = ConstraintSystem::new(vars.into_values().collect(), events.into_values().collect())?;
    let params = if z.is_empty() {
        None
    } else {
        dense(z.keys().copied().collect(), "weight")?;
        if z.len() != system.num_events() {
            return Err(perr(0, format!("{} weights for {} events", z.len(), system.num_events())));
        }
        Some(LllParams::new(z.into_values().collect(), alpha.unwrap_or_else(Rational::one))?)
    };
    Ok(SystemFile { system, params })
}

pub fn write_system(system: &ConstraintSystem, params: Option<&LllParams>) -> String {
    let mut out = String::new();
    for v in system.variables() {
        let _ = write!(out, "var {} {}", v.index, v.range_size());
        for p in v.distribution() {
            let _ = write!(out, " {}", rational::fmt(p));
        }
        out.push('\n');
    }
    for e in system.events() {
        let _ = write!(out, "event {} vbl", e.index);
        for v in e.vbl() {
            let _ = write!(out, " {v}");
        }
        out.push_str(" forbid ");
        let tuples: Vec<String> =
            e.forbidden().iter().map(|t| t.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")).collect();
        out.push_str(&tuples.join(";"));
        out.push('\n');
    }
    if let Some(p) = params {
        for (i, z) in p.z().iter().enumerate() {
            let _ = writeln!(out, "z {i} {}", rational::fmt(z));
        }
        if !p.alpha().is_one() {
            let _ = writeln!(out, "alpha {}", rational::fmt(p.alpha()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn dimacs_roundtrip() {
        let text = "c example\np cnf 4 2\n1 -2 3 0\n-1 4\n0\n";
        let sys = parse_dimacs(text).unwrap();
        assert_eq!(sys.num_variables(), 4);
        assert_eq!(sys.num_events(), 2);
        assert_eq!(sys.event(0).unwrap().vbl(), &[0, 1, 2]);
        assert_eq!(sys.event(0).unwrap().forbidden(), &[vec![0, 1, 0]]);
        assert_eq!(sys.event(1).unwrap().forbidden(), &[vec![1, 0]]);
        let clauses = vec![vec![(0, true), (1, false), (2, true)], vec![(0, false), (3, true)]];
        assert_eq!(parse_dimacs(&write_dimacs(4, &clauses)).unwrap(), sys);
    }

    #[test]
    fn dimacs_errors_carry_lines() {
        match parse_dimacs("p cnf 2 1\n1 5 0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_dimacs("1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 x 0\n").is_err());
    }

    #[test]
    fn text_format_roundtrip() {
        let text = "\
# two variables
var 0 2 1/2 1/2
var 1 3 1/2 1/4 1/4
event 0 vbl 0 1 forbid 1 2;0 0
event 1 vbl 1 forbid 2
z 0 1/2
z 1 0.25
alpha 9/10
";
        let file = parse_system(text).unwrap();
        assert_eq!(file.system.num_events(), 2);
        assert_eq!(file.system.event_probability(0).unwrap(), q(1, 8) + q(1, 4));
        let params = file.params.clone().unwrap();
        assert_eq!(params.z()[1], q(1, 4));
        assert_eq!(params.alpha(), &q(9, 10));
        let again = parse_system(&write_system(&file.system, Some(&params))).unwrap();
        assert_eq!(again.system, file.system);
        assert_eq!(again.params.unwrap(), params);
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!(parse_system("var 0 2 1/2 1/2\nevent 0 vbl 0 forbid 3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_system("var 0 2 1/2\n").is_err());
        assert!(parse_system("var 1 2 1/2 1/2\n").is_err());
        assert!(parse_system("bogus 1\n").is_err());
        assert!(parse_system("var 0 2 1/2 1/2\nevent 0 vbl 0 forbid 1\nevent 1 vbl 0 forbid 0\nz 0 1/2\n").is_err());
    }
}
