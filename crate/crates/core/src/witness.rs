//! Text formats for counterexample traces and invariants, and checks of
//! both that use nothing but the encoding and the SAT solver.
//!
//! Trace: one line per state, `step <i>: inputs <bits> state <bits>`, where
//! the inputs are those applied in that state (`-` after the last state).
//! Invariant: DIMACS CNF over the state variables, preceded by
//! `c var <id> <name>` lines naming each variable.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::circuit::TransitionSystem;
use crate::cnf::{Clause, Cnf, Lit, Truth, Var};
use crate::pclor::Trace;
use crate::sat::{implies, Solver};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("empty trace")]
    Empty,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WitnessFailure {
    #[error("step {step}: expected {expected} {what} bits, found {found}")]
    Width {
        step: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("step 0: not an initial state")]
    NotInitial,
    #[error("step {0}: no transition to the next state")]
    NoTransition(usize),
    #[error("step {0}: final state satisfies the property")]
    NotBad(usize),
    #[error("unknown state variable {0:?}")]
    UnknownName(String),
    #[error("variable {0} has no name")]
    Unnamed(u32),
    #[error("condition 1: initial states are not all inside the invariant")]
    Initiation,
    #[error("condition 2: invariant does not imply the property")]
    Safety,
    #[error("condition 3: invariant is not closed under the transition relation")]
    Consecution,
}

fn bits(b: &[bool]) -> String {
    if b.is_empty() {
        return "-".into();
    }
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

pub fn write_trace(t: &Trace) -> String {
    let mut out = String::new();
    for (i, s) in t.states.iter().enumerate() {
        let x = t.inputs.get(i).map_or("-".to_string(), |x| bits(x));
        out += &format!("step {i}: inputs {x} state {}\n", bits(s));
    }
    out
}

fn parse_bits(line: usize, w: &str) -> Result<Vec<bool>, ParseError> {
    if w == "-" {
        return Ok(Vec::new());
    }
    w.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(ParseError::Line(line, format!("bad bit {c:?}"))),
        })
        .collect()
}

pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    let mut t = Trace {
        states: Vec::new(),
        inputs: Vec::new(),
    };
    let mut last_inputs = None;
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w: Vec<&str> = line.split_whitespace().collect();
        let ok = w.len() == 6 && w[0] == "step" && w[2] == "inputs" && w[4] == "state";
        if !ok || w[1].trim_end_matches(':') != t.states.len().to_string() {
            return Err(ParseError::Line(n, "expected `step <i>: inputs <bits> state <bits>`".into()));
        }
        if let Some(x) = last_inputs.take() {
            t.inputs.push(x);
        }
        t.states.push(parse_bits(n, w[5])?);
        last_inputs = Some(parse_bits(n, w[3])?);
    }
    if t.states.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(t)
}

/// Replays a trace: initial first state, one transition per step, and a
/// final state violating the property.
pub fn verify_trace(ts: &TransitionSystem, t: &Trace) -> Result<(), WitnessFailure> {
    let (ns, nx) = (ts.num_state(), ts.input_vars(0).len());
    for (i, s) in t.states.iter().enumerate() {
        if s.len() != ns {
            return Err(WitnessFailure::Width {
                step: i,
                what: "state",
                expected: ns,
                found: s.len(),
            });
        }
    }
    for (i, x) in t.inputs.iter().enumerate() {
        if x.len() != nx {
            return Err(WitnessFailure::Width {
                step: i,
                what: "input",
                expected: nx,
                found: x.len(),
            });
        }
    }
    if ts.init.evaluate(&ts.state_assignment(&t.states[0], 0)) != Truth::True {
        return Err(WitnessFailure::NotInitial);
    }
    let mut s = Solver::from_cnf(&ts.trans);
    for (i, x) in t.inputs.iter().enumerate() {
        let mut a = ts.state_cube(&t.states[i], 0);
        a.extend(ts.input_vars(0).into_iter().zip(x).map(|(v, &b)| Lit::new(v, b)));
        a.extend(ts.state_cube(&t.states[i + 1], 1));
        if !s.solve(&a) {
            return Err(WitnessFailure::NoTransition(i));
        }
    }
    let last = t.states.len() - 1;
    if ts.prop.evaluate(&ts.state_assignment(&t.states[last], 0)) == Truth::True {
        return Err(WitnessFailure::NotBad(last));
    }
    Ok(())
}

pub fn write_invariant(ts: &TransitionSystem, inv: &Cnf) -> String {
    let vars = ts.state_vars(0);
    let mut out = String::new();
    for (v, name) in vars.iter().zip(ts.vars.names(crate::cnf::Role::State)) {
        out += &format!("c var {} {name}\n", v.0);
    }
    let max = vars.iter().map(|v| v.0).max().unwrap_or(0);
    out += &format!("p cnf {max} {}\n", inv.len());
    for c in inv.iter() {
        for l in c.lits() {
            out += &format!("{} ", l.to_dimacs());
        }
        out += "0\n";
    }
    out
}

/// Clauses and the `c var` name map of an invariant file.
pub fn parse_invariant(text: &str) -> Result<(BTreeMap<u32, String>, Cnf), ParseError> {
    let mut names = BTreeMap::new();
    let mut cnf = Cnf::new();
    let mut cur: Vec<i64> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("c var ") {
            let mut it = rest.splitn(2, ' ');
            let id = it.next().and_then(|x| x.parse().ok());
            let name = it.next().map(str::trim);
            match (id, name) {
                (Some(id), Some(name)) if !name.is_empty() => {
                    names.insert(id, name.to_string());
                }
                _ => return Err(ParseError::Line(n, "expected `c var <id> <name>`".into())),
            }
            continue;
        }
        if line.is_empty() || line.starts_with('c') || line.starts_with('p') {
            continue;
        }
        for w in line.split_whitespace() {
            let x: i64 = w.parse().map_err(|_| ParseError::Line(n, format!("bad literal {w:?}")))?;
            if x == 0 {
                let c = Clause::new(cur.drain(..).map(|x| Lit::from_dimacs(x).unwrap()))
                    .map_err(|e| ParseError::Line(n, e.to_string()))?;
                cnf.push(c);
            } else {
                cur.push(x);
            }
        }
    }
    if !cur.is_empty() {
        return Err(ParseError::Line(text.lines().count(), "clause not terminated by 0".into()));
    }
    Ok((names, cnf))
}

/// Checks `I -> Inv`, `Inv -> P` and `Inv ∧ T -> Inv'`, mapping the file's
/// variables to state variables by name.
pub fn verify_invariant(ts: &TransitionSystem, names: &BTreeMap<u32, String>, inv: &Cnf) -> Result<(), WitnessFailure> {
    let by_name: BTreeMap<&str, Var> = ts
        .vars
        .names(crate::cnf::Role::State)
        .iter()
        .map(String::as_str)
        .zip(ts.state_vars(0))
        .collect();
    let mut map = BTreeMap::new();
    for v in inv.vars() {
        let name = names.get(&v.0).ok_or(WitnessFailure::Unnamed(v.0))?;
        let w = by_name.get(name.as_str()).ok_or_else(|| WitnessFailure::UnknownName(name.clone()))?;
        map.insert(v, *w);
    }
    let inv = inv.map_vars(|v| map[&v]);
    if !implies(&ts.init, &inv) {
        return Err(WitnessFailure::Initiation);
    }
    if !implies(&inv, &ts.prop) {
        return Err(WitnessFailure::Safety);
    }
    let mut step = inv.clone();
    step.extend(&ts.trans);
    if !implies(&step, &ts.shift(&inv, 1)) {
        return Err(WitnessFailure::Consecution);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::load;
    use crate::fixtures::{stuttered, COUNTER2, STUCK0, TOGGLE};
    use crate::pclor::{check, CheckOptions, Witness};

    fn run(text: &str) -> (TransitionSystem, Witness) {
        let (_, orig) = load(text).unwrap();
        let r = check(&stuttered(text).unwrap(), &CheckOptions::default()).unwrap();
        (orig, r.witness)
    }

    #[test]
    fn trace_round_trip_and_replay() {
        let (ts, w) = run(COUNTER2);
        let Witness::Counterexample(t) = w else { panic!() };
        assert_eq!(t.len(), 3);
        let text = write_trace(&t);
        assert!(text.starts_with("step 0: inputs 1 state 00\n"), "{text}");
        let back = parse_trace(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(verify_trace(&ts, &back), Ok(()));
    }

    #[test]
    fn corrupted_input_is_reported_with_its_step() {
        let (ts, w) = run(COUNTER2);
        let Witness::Counterexample(mut t) = w else { panic!() };
        t.inputs[1][0] = !t.inputs[1][0];
        assert_eq!(verify_trace(&ts, &t), Err(WitnessFailure::NoTransition(1)));
    }

    #[test]
    fn toggle_trace_text() {
        let (_, w) = run(TOGGLE);
        let Witness::Counterexample(t) = w else { panic!() };
        assert_eq!(write_trace(&t), "step 0: inputs 1 state 0\nstep 1: inputs - state 1\n");
    }

    #[test]
    fn invariant_round_trip_and_checks() {
        let (ts, w) = run(STUCK0);
        let Witness::Invariant(inv) = w else { panic!() };
        let text = write_invariant(&ts, &inv);
        assert!(text.starts_with("c var 1 s\n"));
        let (names, back) = parse_invariant(&text).unwrap();
        assert_eq!(back, inv);
        assert_eq!(verify_invariant(&ts, &names, &back), Ok(()));
        let weak = Cnf::new();
        assert_eq!(verify_invariant(&ts, &names, &weak), Err(WitnessFailure::Safety));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_trace("step 1: inputs 0 state 0\n"), Err(ParseError::Line(1, _))));
        assert_eq!(parse_trace("# nothing\n"), Err(ParseError::Empty));
        assert!(parse_invariant("1 2\n").is_err());
    }
}
