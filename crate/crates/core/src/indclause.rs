//! Clauses inductive relative to a frame, and the checker variant that
//! uses them to exclude states.
//!
//! A clause `C` is inductive relative to `F` when `F ∧ C ∧ T -> C'`. Every
//! clause made here also satisfies `I -> C`; together these make `C` true
//! on every state reachable within one step more than `F` covers, so it
//! can be conjoined to `H_1 .. H_k` without changing what the chain
//! projects to.

use crate::boundary::{block_clause, FrameChain};
use crate::circuit::TransitionSystem;
use crate::cnf::{Clause, Cnf, Lit};
use crate::pclor::{check, convert_cex, step_out_of, CheckError, CheckOptions, CheckResult, Engine, Trace};
use crate::sat::Solver;

/// A state that keeps `target` from being excluded at `frame`: it lies in
/// the previous frame and steps to `target`. When `target` is initial, the
/// two coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cti {
    pub state: Vec<bool>,
    pub target: Vec<bool>,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Induction {
    Clause(Clause),
    Cti(Cti),
}

fn initiation(ts: &TransitionSystem, c: &Clause) -> bool {
    let mut s = Solver::from_cnf(&ts.init);
    let neg: Vec<Lit> = c.lits().iter().map(|&l| !l).collect();
    !s.solve(&neg)
}

/// `F ∧ C ∧ T -> C'`.
fn consecution(ts: &TransitionSystem, f: &Cnf, c: &Clause) -> bool {
    let mut s = Solver::from_cnf(f);
    s.add_cnf(&ts.trans);
    s.add_clause(c.lits());
    let neg: Vec<Lit> = ts.shift_clause(c, 1).lits().iter().map(|&l| !l).collect();
    !s.solve(&neg)
}

/// A generalized clause excluding `s`, inductive relative to `f` and
/// implied by `I`; or the reason there is none.
pub fn make_inductive_clause(ts: &TransitionSystem, f: &Cnf, s: &[bool], frame: usize) -> Induction {
    let c = block_clause(ts, s);
    if !initiation(ts, &c) {
        return Induction::Cti(Cti {
            state: s.to_vec(),
            target: s.to_vec(),
            frame,
        });
    }
    let mut q = Solver::from_cnf(f);
    q.add_cnf(&ts.trans);
    q.add_clause(c.lits());
    if q.solve(&ts.state_cube(s, 1)) {
        return Induction::Cti(Cti {
            state: ts.state_of(&q.model(), 0),
            target: s.to_vec(),
            frame,
        });
    }
    Induction::Clause(generalize(ts, f, &c))
}

/// Drops literals in ascending variable order while the clause stays
/// implied by `I` and inductive relative to `f`.
pub fn generalize(ts: &TransitionSystem, f: &Cnf, c: &Clause) -> Clause {
    let mut cur = c.clone();
    let mut lits = c.lits().to_vec();
    lits.sort_by_key(|l| l.var());
    for l in lits {
        let cand = Clause::new(cur.lits().iter().copied().filter(|&x| x != l)).expect("subset of a clause");
        if initiation(ts, &cand) && consecution(ts, f, &cand) {
            cur = cand;
        }
    }
    cur
}

enum Blocked {
    Done,
    /// A real path from an initial state to the state being blocked.
    ReachedInit,
}

/// Excludes `s` from `H_k` and everything it depends on, IC3 style.
fn block_state(chain: &mut FrameChain, k: usize, s: &[bool]) -> Blocked {
    let ts = chain.ts.clone();
    let mut stack = vec![(k, s.to_vec())];
    while let Some((k, s)) = stack.last().cloned() {
        if k == 0 {
            return Blocked::ReachedInit;
        }
        match make_inductive_clause(&ts, chain.frame(k - 1), &s, k) {
            Induction::Clause(c) => {
                for m in 1..=k {
                    chain.add_clause(m, c.clone());
                }
                stack.pop();
            }
            Induction::Cti(cti) if cti.state == cti.target => return Blocked::ReachedInit,
            Induction::Cti(cti) => stack.push((k - 1, cti.state)),
        }
    }
    Blocked::Done
}

/// Excludes a state known to be unreachable in `k` steps from `H_k`.
pub fn block(chain: &mut FrameChain, k: usize, s: &[bool]) -> Result<(), CheckError> {
    match block_state(chain, k, s) {
        Blocked::Done => Ok(()),
        Blocked::ReachedInit => Err(CheckError::Internal(format!(
            "state {s:?} excluded from frame {k} is reachable"
        ))),
    }
}

/// Like [`crate::pclor::rem_bad_st`], with bad predecessors excluded by
/// inductive clauses.
pub fn rem_bad_st_ic(chain: &mut FrameChain, j: usize) -> Result<Option<Trace>, CheckError> {
    let ts = chain.ts.clone();
    loop {
        let Some(m) = step_out_of(&ts, chain.frame(j - 1), &ts.trans, &ts.prop) else {
            return Ok(None);
        };
        let s = ts.state_of(&m, 0);
        if let Blocked::ReachedInit = block_state(chain, j - 1, &s) {
            return convert_cex(&ts, j).map(Some);
        }
    }
}

/// [`check`] with the inductive-clause engine.
pub fn pc_lor_ic(ts: &TransitionSystem, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    check(ts, &CheckOptions { engine: Engine::LorIc, ..opts.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::FrameChain;
    use crate::fixtures::{stuttered, MUTEX, STUCK0, TOGGLE};
    use crate::pclor::{educat_guess_rlx, Guess};
    use crate::pqe::PqeOptions;
    use crate::qe_oracle::equivalent;

    #[test]
    fn stuck0_one_is_excluded_by_not_s() {
        let ts = stuttered(STUCK0).unwrap();
        let s = ts.state_vars(0)[0];
        let r = make_inductive_clause(&ts, &Cnf::new(), &[true], 1);
        assert_eq!(r, Induction::Clause(Clause::new([s.neg()]).unwrap()));
    }

    #[test]
    fn toggle_one_has_a_predecessor() {
        let ts = stuttered(TOGGLE).unwrap();
        let r = make_inductive_clause(&ts, &Cnf::new(), &[true], 1);
        assert_eq!(
            r,
            Induction::Cti(Cti {
                state: vec![false],
                target: vec![true],
                frame: 1
            })
        );
    }

    #[test]
    fn initial_state_cannot_be_excluded() {
        let ts = stuttered(TOGGLE).unwrap();
        let Induction::Cti(c) = make_inductive_clause(&ts, &Cnf::new(), &[false], 1) else {
            panic!()
        };
        assert_eq!(c.state, c.target);
    }

    #[test]
    fn generalization_drops_irrelevant_literals() {
        let ts = stuttered(MUTEX).unwrap();
        let v = ts.state_vars(0);
        let c = Clause::new([v[0].neg(), v[1].neg()]).unwrap();
        let g = generalize(&ts, &Cnf::new(), &c);
        assert!(g.len() <= c.len());
        assert!(initiation(&ts, &g) && consecution(&ts, &Cnf::new(), &g));
        let s = ts.state_vars(0)[0];
        let stuck = stuttered(STUCK0).unwrap();
        let wide = Clause::new([s.neg(), stuck.input_vars(0)[0].neg()]).unwrap();
        assert_eq!(generalize(&stuck, &Cnf::new(), &wide), Clause::new([s.neg()]).unwrap());
    }

    #[test]
    fn blocked_clauses_are_initiated_and_relatively_inductive() {
        let ts = stuttered(MUTEX).unwrap();
        let mut chain = FrameChain::new(ts.clone(), PqeOptions::default());
        chain.push_frame();
        chain.push_frame();
        block(&mut chain, 2, &[true, true]).unwrap();
        for k in 1..=2 {
            for c in chain.frame(k).iter() {
                assert!(initiation(&ts, c));
                assert!(consecution(&ts, chain.frame(k - 1), c));
            }
        }
    }

    #[test]
    fn guess_seeds() {
        let ts = stuttered(STUCK0).unwrap();
        let s = ts.state_vars(0)[0];
        let mut chain = FrameChain::new(ts.clone(), PqeOptions::default());
        chain.push_frame();
        let g = educat_guess_rlx(&mut chain, 1, &Guess::DropAll).unwrap();
        assert!(equivalent(&g, &Cnf::from_clauses([Clause::new([s.neg()]).unwrap()])).unwrap());
        let mut chain = FrameChain::new(ts, PqeOptions::default());
        chain.push_frame();
        let g = educat_guess_rlx(&mut chain, 1, &Guess::DropTag("nothing".into())).unwrap();
        assert!(g.is_empty());
    }
}
