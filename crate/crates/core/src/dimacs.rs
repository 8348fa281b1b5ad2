//! DIMACS extended with a quantifier line and a split between the clauses
//! to take out and the rest:
//!
//! ```text
//! p pqe <vars> <A-clauses> <B-clauses>
//! w 3 4 0
//! 1 3 0
//! %
//! 2 -3 0
//! ```

use thiserror::Error;

use crate::cnf::{Clause, Cnf, Lit, Var};
use crate::pqe::PqeTask;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("missing `p pqe` header")]
    NoHeader,
    #[error("header announces {expected} {part} clauses, found {found}")]
    Count {
        part: &'static str,
        expected: usize,
        found: usize,
    },
}

pub fn parse_pqe(text: &str) -> Result<PqeTask, DimacsError> {
    let mut header: Option<(u32, usize, usize)> = None;
    let mut w: Vec<Var> = Vec::new();
    let (mut a, mut b) = (Cnf::new(), Cnf::new());
    let mut in_b = false;
    let mut cur: Vec<Lit> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        let line = line.trim();
        let bad = |m: &str| DimacsError::Line(n, m.to_string());
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            let nums: Option<Vec<usize>> = f.iter().skip(1).map(|x| x.parse().ok()).collect();
            match (f.first(), nums.as_deref()) {
                (Some(&"pqe"), Some(&[v, na, nb])) if header.is_none() => header = Some((v as u32, na, nb)),
                _ => return Err(bad("expected `p pqe <vars> <A> <B>`")),
            }
            continue;
        }
        let Some((nvars, _, _)) = header else {
            return Err(DimacsError::NoHeader);
        };
        let lit = |x: i64| -> Result<Lit, DimacsError> {
            match Lit::from_dimacs(x) {
                Some(l) if l.var().0 <= nvars => Ok(l),
                _ => Err(bad(&format!("literal {x} out of range"))),
            }
        };
        if let Some(rest) = line.strip_prefix("w ") {
            for x in rest.split_whitespace() {
                let x: i64 = x.parse().map_err(|_| bad("bad variable"))?;
                if x == 0 {
                    break;
                }
                if x < 0 {
                    return Err(bad("negative quantified variable"));
                }
                w.push(lit(x)?.var());
            }
            continue;
        }
        if line == "%" {
            if in_b || !cur.is_empty() {
                return Err(bad("unexpected `%`"));
            }
            in_b = true;
            continue;
        }
        for x in line.split_whitespace() {
            let x: i64 = x.parse().map_err(|_| bad(&format!("bad literal {x:?}")))?;
            if x == 0 {
                let c = Clause::new(cur.drain(..)).map_err(|e| bad(&e.to_string()))?;
                if in_b { b.push(c) } else { a.push(c) }
            } else {
                cur.push(lit(x)?);
            }
        }
    }
    let (_, na, nb) = header.ok_or(DimacsError::NoHeader)?;
    if !cur.is_empty() {
        return Err(DimacsError::Line(text.lines().count(), "clause not terminated by 0".into()));
    }
    for (part, expected, found) in [("A", na, a.len()), ("B", nb, b.len())] {
        if expected != found {
            return Err(DimacsError::Count { part, expected, found });
        }
    }
    Ok(PqeTask::new(w, a, b))
}

/// One line per clause, no header.
pub fn write_clauses(f: &Cnf) -> String {
    let mut out = String::new();
    for c in f.iter() {
        for l in c.lits() {
            out += &format!("{} ", l.to_dimacs());
        }
        out += "0\n";
    }
    out
}

pub fn write_pqe(task: &PqeTask) -> String {
    let nvars = task.a.vars().into_iter().chain(task.b.vars()).chain(task.quantified.iter().copied()).map(|v| v.0).max().unwrap_or(0);
    let mut out = format!("p pqe {nvars} {} {}\nw ", task.a.len(), task.b.len());
    for v in &task.quantified {
        out += &format!("{} ", v.0);
    }
    out += "0\n";
    out += &write_clauses(&task.a);
    out += "%\n";
    out += &write_clauses(&task.b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "p pqe 3 1 1\nw 3 0\n1 3 0\n%\n2 -3 0\n";

    #[test]
    fn parses_small_task() {
        let t = parse_pqe(SMALL).unwrap();
        assert_eq!(t.quantified, vec![Var(3)]);
        assert_eq!(t.a, Cnf::from_dimacs(&[&[1, 3]]));
        assert_eq!(t.b, Cnf::from_dimacs(&[&[2, -3]]));
        assert_eq!(parse_pqe(&write_pqe(&t)).unwrap(), t);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(parse_pqe("1 2 0\n"), Err(DimacsError::NoHeader));
        assert!(matches!(parse_pqe("p pqe 2 1 0\n1 5 0\n%\n"), Err(DimacsError::Line(2, _))));
        assert!(matches!(parse_pqe("p pqe 2 2 0\n1 0\n%\n"), Err(DimacsError::Count { part: "A", .. })));
        assert!(matches!(parse_pqe("p cnf 2 1\n1 0\n"), Err(DimacsError::Line(1, _))));
    }

    #[test]
    fn empty_answer_prints_nothing() {
        assert_eq!(write_clauses(&Cnf::new()), "");
        assert_eq!(write_clauses(&Cnf::from_dimacs(&[&[1, 2]])), "1 2 0\n");
    }
}
