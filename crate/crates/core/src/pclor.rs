//! The main checking loop over a [`FrameChain`].
//!
//! Each iteration at depth `j`:
//! 1. strengthen `H_{j-1}` until no step leaves `P` ([`rem_bad_st`]), or
//!    find a counterexample;
//! 2. build `H_j` from relaxations and their makeup clauses ([`fin_rlx`]);
//! 3. make every relaxed step land inside the next frame
//!    ([`third_co_cond`]);
//! 4. copy clauses to earlier frames and look for two equal frames
//!    ([`fin_touch`]).
//!
//! The inductive-clause variant (see [`crate::indclause`]) swaps the
//! state-exclusion step of 1 and 3 for IC3-style clauses.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::boundary::{add_negation, CoReport, FrameChain};
use crate::circuit::TransitionSystem;
use crate::cnf::{Assignment, Clause, Cnf, Truth};
use crate::indclause;
use crate::pqe::{PqeError, PqeOptions};
use crate::qe_oracle::{verify_boundary, MAX_STATE_BITS};
use crate::sat::{is_sat, max_relax_solve, Solver};

/// Which transition clauses to drop before building a new frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guess {
    DropTag(String),
    DropAll,
}

impl FromStr for Guess {
    type Err = String;

    fn from_str(s: &str) -> Result<Guess, String> {
        match s.strip_prefix("drop:") {
            Some("all") => Ok(Guess::DropAll),
            Some(tag) if !tag.is_empty() => Ok(Guess::DropTag(tag.to_string())),
            _ => Err(format!("expected drop:<tag> or drop:all, got {s:?}")),
        }
    }
}

impl fmt::Display for Guess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guess::DropTag(t) => write!(f, "drop:{t}"),
            Guess::DropAll => write!(f, "drop:all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Frames strengthened only by makeup clauses.
    Lor,
    /// Bad states excluded by inductive clauses; frames still built by
    /// relaxation.
    LorIc,
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Engine, String> {
        match s {
            "lor" => Ok(Engine::Lor),
            "lor-ic" => Ok(Engine::LorIc),
            _ => Err(format!("unknown engine {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub engine: Engine,
    /// Defaults to `2^|S| + 1`.
    pub max_frames: Option<usize>,
    pub pqe: PqeOptions,
    pub guess: Option<Guess>,
    /// Conjoin `P` to a guessed frame. `None` means: only for [`Engine::LorIc`].
    pub seed_with_prop: Option<bool>,
    /// Record [`FrameChain::check_co`] after every iteration.
    pub check_co: bool,
    /// Check every frame with [`verify_boundary`] after every iteration.
    pub oracle_check: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            engine: Engine::Lor,
            max_frames: None,
            pqe: PqeOptions::default(),
            guess: None,
            seed_with_prop: None,
            check_co: false,
            oracle_check: false,
        }
    }
}

/// States `0..=n` and the inputs applied between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<Vec<bool>>,
    pub inputs: Vec<Vec<bool>>,
}

impl Trace {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Counterexample(Trace),
    /// A formula over the state variables (frame 0).
    Invariant(Cnf),
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub j: usize,
    pub clause_counts: Vec<usize>,
    pub co: Option<CoReport>,
    /// Every frame accepted by the reachability oracle; `None` when not
    /// checked or too large.
    pub boundary: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub witness: Witness,
    /// Depth of the chain at termination.
    pub frames: usize,
    pub iterations: Vec<IterationReport>,
    pub pqe_nodes: u64,
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("the transition system has no stuttering")]
    NotStuttered,
    #[error("no verdict within {0} frames")]
    MaxFrames(usize),
    #[error("quantifier elimination gave up at depth {}: {source}", .frames.len() - 1)]
    Pqe { source: PqeError, frames: Vec<Cnf> },
    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn pqe_err(chain: &FrameChain) -> impl FnOnce(PqeError) -> CheckError + '_ {
    move |source| CheckError::Pqe {
        source,
        frames: chain.frames().to_vec(),
    }
}

/// A model of `from@0 ∧ trans@0 ∧ ¬to@1`, if any.
pub(crate) fn step_out_of(ts: &TransitionSystem, from: &Cnf, trans: &Cnf, to: &Cnf) -> Option<Assignment> {
    let mut s = Solver::from_cnf(from);
    s.add_cnf(trans);
    if !add_negation(&mut s, &ts.shift(to, 1)) || !s.solve(&[]) {
        return None;
    }
    Some(s.model())
}

/// A frame-0 state of `from` with a `trans`-successor equal to `target`.
pub(crate) fn predecessor(ts: &TransitionSystem, from: &Cnf, trans: &Cnf, target: &[bool]) -> Option<Vec<bool>> {
    let mut s = Solver::from_cnf(from);
    s.add_cnf(trans);
    if s.solve(&ts.state_cube(target, 1)) {
        Some(ts.state_of(&s.model(), 0))
    } else {
        None
    }
}

/// Bounded model checking: a path of exactly `depth` steps from an initial
/// state to a state violating the property.
pub fn bmc(ts: &TransitionSystem, depth: usize) -> Option<Trace> {
    let mut s = Solver::from_cnf(&ts.init);
    for k in 0..depth {
        s.add_cnf(&ts.frame(k as u32));
    }
    if !add_negation(&mut s, &ts.shift(&ts.prop, depth as u32)) || !s.solve(&[]) {
        return None;
    }
    let m = s.model();
    Some(Trace {
        states: (0..=depth).map(|k| ts.state_of(&m, k as u32)).collect(),
        inputs: (0..depth).map(|k| ts.inputs_of(&m, k as u32)).collect(),
    })
}

/// Drops copy steps and the stuttering input, giving a trace of the system
/// before stuttering was added.
pub fn strip_stuttering(ts: &TransitionSystem, t: &Trace) -> Trace {
    let Some(v) = ts.stuttering_var else {
        return t.clone();
    };
    let slot = ts.input_vars(0).iter().position(|&x| x == v).expect("stuttering input");
    let mut out = Trace {
        states: vec![t.states[0].clone()],
        inputs: Vec::new(),
    };
    for (i, x) in t.inputs.iter().enumerate() {
        if x[slot] {
            let mut x = x.clone();
            x.remove(slot);
            out.inputs.push(x);
            out.states.push(t.states[i + 1].clone());
        }
    }
    out
}

/// Rebuilds a counterexample of length at most `depth` under the original
/// transition relation once the relaxed chain has shown one exists.
pub fn convert_cex(ts: &TransitionSystem, depth: usize) -> Result<Trace, CheckError> {
    bmc(ts, depth)
        .map(|t| strip_stuttering(ts, &t))
        .ok_or_else(|| CheckError::Internal(format!("relaxed counterexample of depth {depth} has no concrete replay")))
}

/// Clauses to drop from the step `k-1 -> k` so that `target` becomes
/// reachable in the relaxed chain: a locally minimal set among the
/// non-stuttering clauses still present.
pub fn select_relaxation(chain: &FrameChain, k: usize, target: &[bool]) -> Result<BTreeSet<usize>, CheckError> {
    let ts = &chain.ts;
    let at = (k - 1) as u32;
    let soft_idx = chain.relaxable(k - 1);
    let mut hard = chain.unrolled(k - 1);
    let fixed: Vec<usize> = (0..ts.trans.len())
        .filter(|i| !chain.removed(k - 1).contains(i) && soft_idx.binary_search(i).is_err())
        .collect();
    for &i in &fixed {
        hard.push(ts.shift_clause(&ts.trans.clauses()[i], at));
    }
    hard.extend(&ts.shift(chain.frame(k), k as u32));
    let soft = Cnf::from_clauses(soft_idx.iter().map(|&i| ts.shift_clause(&ts.trans.clauses()[i], at)));
    let tgt = ts.state_assignment(target, k as u32);
    let res = max_relax_solve(&hard, &soft, &tgt)
        .map_err(|_| CheckError::Internal(format!("state {target:?} unreachable at frame {k} under any relaxation")))?;
    if res.falsified_soft.is_empty() {
        return Err(CheckError::Internal(format!("state {target:?} already reachable at frame {k}")));
    }
    Ok(res.falsified_soft.iter().map(|&i| soft_idx[i]).collect())
}

/// Removes an unreachable state `s` from `H_k` by relaxing the step into
/// frame `k` until `s` looks reachable and conjoining the makeup clauses.
pub(crate) fn exclude_by_relaxation(chain: &mut FrameChain, k: usize, s: &[bool]) -> Result<(), CheckError> {
    if k == 0 {
        return Err(CheckError::Internal("asked to exclude an initial state".into()));
    }
    let r = select_relaxation(chain, k, s)?;
    let g = chain.relax_with_makeup(k, &r).map_err(pqe_err(chain))?;
    if g.evaluate(&chain.ts.state_assignment(s, 0)) != Truth::False {
        return Err(CheckError::Internal(format!("makeup clauses at frame {k} keep {s:?}")));
    }
    Ok(())
}

/// Strengthens `H_{j-1}` until no step from it violates the property, or
/// returns a counterexample.
pub fn rem_bad_st(chain: &mut FrameChain, j: usize) -> Result<Option<Trace>, CheckError> {
    let ts = chain.ts.clone();
    loop {
        let Some(m) = step_out_of(&ts, chain.frame(j - 1), &ts.trans, &ts.prop) else {
            return Ok(None);
        };
        // Reverse partial trace: (frame, state), the top is the earliest.
        let mut stack = vec![(j - 1, ts.state_of(&m, 0))];
        while let Some((k, s)) = stack.last().cloned() {
            if k == 0 {
                return convert_cex(&ts, j).map(Some);
            }
            match predecessor(&ts, chain.frame(k - 1), &chain.rlx_trans(k - 1), &s) {
                Some(p) => stack.push((k - 1, p)),
                None => {
                    exclude_by_relaxation(chain, k, &s)?;
                    stack.pop();
                }
            }
        }
    }
}

/// Builds `H_j` (already pushed as `true` or as a guessed seed) by
/// excluding one bad state at a time until `H_j -> P`.
pub fn fin_rlx(chain: &mut FrameChain, j: usize) -> Result<(), CheckError> {
    let ts = chain.ts.clone();
    loop {
        let mut s = Solver::from_cnf(chain.frame(j));
        if !add_negation(&mut s, &ts.prop) || !s.solve(&[]) {
            return Ok(());
        }
        let bad = ts.state_of(&s.model(), 0);
        exclude_by_relaxation(chain, j, &bad)?;
    }
}

/// Repairs `H_{m-1} ∧ T^rlx_{m-1} -> H_m'` for every `m`, top down. A state
/// of `H_{m-1}` with a real step out of `H_m` cannot be reachable and is
/// excluded; a relaxed-only step brings back the removed clauses it
/// violates. Returns whether the chain changed.
pub fn third_co_cond(chain: &mut FrameChain, engine: Engine) -> Result<bool, CheckError> {
    let ts = chain.ts.clone();
    let mut changed = false;
    for m in (1..=chain.depth()).rev() {
        loop {
            if let Some(a) = step_out_of(&ts, chain.frame(m - 1), &ts.trans, chain.frame(m)) {
                let s = ts.state_of(&a, 0);
                match engine {
                    Engine::Lor => exclude_by_relaxation(chain, m - 1, &s)?,
                    Engine::LorIc => indclause::block(chain, m - 1, &s)?,
                }
                changed = true;
                continue;
            }
            if let Some(a) = step_out_of(&ts, chain.frame(m - 1), &chain.rlx_trans(m - 1), chain.frame(m)) {
                let back: Vec<usize> = chain
                    .removed(m - 1)
                    .iter()
                    .copied()
                    .filter(|&i| ts.trans.clauses()[i].eval(&a) == Truth::False)
                    .collect();
                if back.is_empty() {
                    return Err(CheckError::Internal(format!("relaxed step into frame {m} needs no removed clause")));
                }
                chain.restore(m - 1, back);
                changed = true;
                continue;
            }
            break;
        }
    }
    Ok(changed)
}

/// Copies clauses of each frame into the one before it until every frame
/// implies the next, repairing the step condition after each round; then
/// looks for an inductive frame.
pub fn fin_touch(chain: &mut FrameChain, engine: Engine) -> Result<Option<(usize, Cnf)>, CheckError> {
    loop {
        let mut pushed = false;
        for m in (2..=chain.depth()).rev() {
            let clauses: Vec<Clause> = chain.frame(m).clauses().to_vec();
            for c in clauses {
                if !chain.frame_implies(m - 1, &c) {
                    chain.add_clause(m - 1, c);
                    pushed = true;
                }
            }
        }
        let repaired = third_co_cond(chain, engine)?;
        if !pushed && !repaired {
            break;
        }
    }
    Ok(chain.detect_invariant())
}

/// Drops the guessed clauses from the step into frame `j` and returns the
/// makeup clauses conjoined to `H_j`.
pub fn educat_guess_rlx(chain: &mut FrameChain, j: usize, guess: &Guess) -> Result<Cnf, CheckError> {
    let r: BTreeSet<usize> = match guess {
        Guess::DropAll => (0..chain.ts.trans.len()).collect(),
        Guess::DropTag(t) => chain.ts.tagged(t).into_iter().collect(),
    };
    chain.relax_with_makeup(j, &r).map_err(pqe_err(chain))
}

fn default_max_frames(ts: &TransitionSystem) -> usize {
    let n = ts.num_state();
    if n >= 20 {
        (1 << 20) + 1
    } else {
        (1 << n) + 1
    }
}

fn report(chain: &FrameChain, opts: &CheckOptions) -> IterationReport {
    let j = chain.depth();
    let boundary = (opts.oracle_check && chain.ts.num_state() <= MAX_STATE_BITS)
        .then(|| {
            (1..=j).try_fold(true, |ok, k| {
                verify_boundary(chain.frame(k), &chain.ts, &chain.rlx_trans(k - 1), k).map(|b| ok && b)
            })
        })
        .and_then(Result::ok);
    IterationReport {
        j,
        clause_counts: chain.frames().iter().map(Cnf::len).collect(),
        co: opts.check_co.then(|| chain.check_co()),
        boundary,
    }
}

/// Runs the checker on a stuttered transition system.
pub fn check(ts: &TransitionSystem, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    if !ts.stuttered {
        return Err(CheckError::NotStuttered);
    }
    let done = |witness, frames, iterations, pqe_nodes| {
        Ok(CheckResult {
            witness,
            frames,
            iterations,
            pqe_nodes,
        })
    };
    if !is_sat(&ts.init) {
        return done(Witness::Invariant(ts.init.clone()), 0, Vec::new(), 0);
    }
    if let Some(t) = bmc(ts, 0) {
        return done(Witness::Counterexample(t), 0, Vec::new(), 0);
    }
    let max = opts.max_frames.unwrap_or_else(|| default_max_frames(ts));
    let seed_with_prop = opts.seed_with_prop.unwrap_or(opts.engine == Engine::LorIc);
    let mut chain = FrameChain::new(ts.clone(), opts.pqe.clone());
    let mut iterations = Vec::new();
    for j in 1.. {
        if j > max {
            return Err(CheckError::MaxFrames(max));
        }
        let cex = match opts.engine {
            Engine::Lor => rem_bad_st(&mut chain, j)?,
            Engine::LorIc => indclause::rem_bad_st_ic(&mut chain, j)?,
        };
        if let Some(t) = cex {
            return done(Witness::Counterexample(t), j, iterations, chain.pqe_nodes());
        }
        chain.push_frame();
        if let Some(g) = &opts.guess {
            educat_guess_rlx(&mut chain, j, g)?;
            if seed_with_prop {
                let p = chain.ts.prop.clone();
                chain.add_clauses(j, &p);
            }
        }
        fin_rlx(&mut chain, j)?;
        third_co_cond(&mut chain, opts.engine)?;
        let inv = fin_touch(&mut chain, opts.engine)?;
        iterations.push(report(&chain, opts));
        if let Some((_, inv)) = inv {
            return done(Witness::Invariant(inv), j, iterations, chain.pqe_nodes());
        }
    }
    unreachable!()
}

/// [`check`] with the makeup-clause engine.
pub fn pc_lor(ts: &TransitionSystem, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    check(ts, &CheckOptions { engine: Engine::Lor, ..opts.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, miter, stuttered, DFF, DFF_BAD, DFF_INV, STUCK0, TOGGLE};
    use crate::qe_oracle::{equivalent, first_bad_depth};
    use crate::sat::implies;

    fn opts(engine: Engine) -> CheckOptions {
        CheckOptions {
            engine,
            check_co: true,
            oracle_check: true,
            ..CheckOptions::default()
        }
    }

    fn inductive(ts: &TransitionSystem, inv: &Cnf) -> bool {
        let mut step = inv.clone();
        step.extend(&ts.trans);
        implies(&ts.init, inv) && implies(inv, &ts.prop) && implies(&step, &ts.shift(inv, 1))
    }

    fn assert_sound(ts: &TransitionSystem, r: &CheckResult) {
        for it in &r.iterations {
            let co = it.co.as_ref().unwrap();
            assert!(co.passes(), "iteration {}: {:?}", it.j, co.violations());
            assert_ne!(it.boundary, Some(false), "iteration {}", it.j);
        }
        match &r.witness {
            Witness::Invariant(inv) => assert!(inductive(ts, inv)),
            Witness::Counterexample(t) => assert_eq!(Some(t.len()), first_bad_depth(ts).unwrap()),
        }
    }

    #[test]
    fn stuck0_invariant_is_not_s() {
        let ts = stuttered(STUCK0).unwrap();
        for e in [Engine::Lor, Engine::LorIc] {
            let r = check(&ts, &opts(e)).unwrap();
            assert_sound(&ts, &r);
            assert!(r.frames <= 2);
            let Witness::Invariant(inv) = &r.witness else { panic!() };
            assert!(equivalent(inv, &ts.prop).unwrap());
        }
    }

    #[test]
    fn toggle_fails_in_one_step() {
        let ts = stuttered(TOGGLE).unwrap();
        for e in [Engine::Lor, Engine::LorIc] {
            let r = check(&ts, &opts(e)).unwrap();
            let Witness::Counterexample(t) = &r.witness else { panic!() };
            assert_eq!(t.states, vec![vec![false], vec![true]]);
            assert_eq!(t.inputs, vec![vec![true]]);
        }
    }

    #[test]
    fn fixtures_match_bruteforce() {
        for (name, text) in fixtures::ALL {
            let ts = stuttered(text).unwrap();
            let expect = first_bad_depth(&ts).unwrap();
            for e in [Engine::Lor, Engine::LorIc] {
                let r = check(&ts, &opts(e)).unwrap_or_else(|err| panic!("{name} {e:?}: {err}"));
                assert_sound(&ts, &r);
                let fails = matches!(r.witness, Witness::Counterexample(_));
                assert_eq!(fails, expect.is_some(), "{name} {e:?}");
            }
        }
    }

    #[test]
    fn dff_sec_with_interface_guess() {
        for (n, k, equal) in [(DFF, DFF, true), (DFF, DFF_INV, true), (DFF, DFF_BAD, false)] {
            let ts = miter(n, k).unwrap();
            for e in [Engine::Lor, Engine::LorIc] {
                let o = CheckOptions {
                    guess: Some(Guess::DropTag("interface".into())),
                    ..opts(e)
                };
                let r = check(&ts, &o).unwrap();
                assert_sound(&ts, &r);
                assert_eq!(matches!(r.witness, Witness::Invariant(_)), equal);
                if equal {
                    assert!(r.frames <= 2, "{e:?} took {} frames", r.frames);
                }
            }
        }
    }

    #[test]
    fn unstuttered_input_is_rejected() {
        let (_, ts) = crate::circuit::load(STUCK0).unwrap();
        assert!(matches!(check(&ts, &CheckOptions::default()), Err(CheckError::NotStuttered)));
    }

    #[test]
    fn guess_parsing() {
        assert_eq!("drop:interface".parse(), Ok(Guess::DropTag("interface".into())));
        assert_eq!("drop:all".parse(), Ok(Guess::DropAll));
        assert!("keep:x".parse::<Guess>().is_err());
        assert_eq!(Guess::DropAll.to_string(), "drop:all");
    }
}
