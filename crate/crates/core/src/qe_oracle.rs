//! Enumeration-based ground truth: complete quantifier elimination, checks
//! of partial quantifier elimination answers, and explicit reachable-state
//! sets. Everything here is exponential and refuses inputs beyond its
//! budget instead of truncating.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::circuit::TransitionSystem;
use crate::cnf::{Clause, Cnf, Lit, Truth, Var};
use crate::sat::Solver;

pub const MAX_ENUM_VARS: usize = 24;
pub const MAX_STATE_BITS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} variables exceed the enumeration budget of {MAX_ENUM_VARS}")]
    TooManyVars(usize),
    #[error("{0} state bits exceed the reachability budget of {MAX_STATE_BITS}")]
    TooManyStateBits(usize),
    #[error("the answer mentions quantified variable {0}")]
    QuantifiedVarInAnswer(Var),
}

/// Clauses packed as bit masks over a local variable numbering.
struct Packed {
    clauses: Vec<(u32, u32)>,
}

impl Packed {
    fn new(f: &Cnf, index: &HashMap<Var, usize>) -> Packed {
        Packed {
            clauses: f
                .iter()
                .map(|c| {
                    let (mut pos, mut neg) = (0u32, 0u32);
                    for l in c.lits() {
                        let b = 1u32 << index[&l.var()];
                        if l.is_positive() {
                            pos |= b;
                        } else {
                            neg |= b;
                        }
                    }
                    (pos, neg)
                })
                .collect(),
        }
    }

    fn sat(&self, m: u32) -> bool {
        self.clauses.iter().all(|&(p, n)| (m & p) | (!m & n) != 0)
    }
}

/// Splits variables into free (low bits) then quantified (high bits).
fn layout(w: &[Var], fs: &[&Cnf]) -> Result<(Vec<Var>, Vec<Var>, HashMap<Var, usize>), OracleError> {
    let wset: BTreeSet<Var> = w.iter().copied().collect();
    let all: BTreeSet<Var> = fs.iter().flat_map(|f| f.vars()).collect();
    let vs: Vec<Var> = all.iter().filter(|v| !wset.contains(v)).copied().collect();
    let ws: Vec<Var> = all.iter().filter(|v| wset.contains(v)).copied().collect();
    if all.len() > MAX_ENUM_VARS {
        return Err(OracleError::TooManyVars(all.len()));
    }
    let index = vs.iter().chain(ws.iter()).enumerate().map(|(i, &v)| (v, i)).collect();
    Ok((vs, ws, index))
}

/// For each assignment to the free variables, whether some assignment to the
/// quantified ones satisfies every formula in `fs`.
fn exists_table(nv: usize, nw: usize, fs: &[Packed]) -> Vec<bool> {
    (0u32..1 << nv)
        .map(|v| (0u32..1 << nw).any(|w| fs.iter().all(|f| f.sat(v | w << nv))))
        .collect()
}

fn point_clause(vs: &[Var], bits: u32) -> Clause {
    Clause::new(vs.iter().enumerate().map(|(i, &v)| Lit::new(v, bits >> i & 1 == 0))).unwrap()
}

/// `∃W f` as one clause per excluded point of the free variables, ascending.
pub fn qe_bruteforce(w: &[Var], f: &Cnf) -> Result<Cnf, OracleError> {
    let (vs, ws, index) = layout(w, &[f])?;
    let table = exists_table(vs.len(), ws.len(), &[Packed::new(f, &index)]);
    Ok(table
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(bits, _)| point_clause(&vs, bits as u32))
        .collect())
}

/// Whether `a_star ∧ ∃W b ≡ ∃W (a ∧ b)` for every free assignment.
pub fn check_pqe(w: &[Var], a: &Cnf, b: &Cnf, a_star: &Cnf) -> Result<bool, OracleError> {
    if let Some(v) = w.iter().find(|v| a_star.vars().contains(v)) {
        return Err(OracleError::QuantifiedVarInAnswer(*v));
    }
    let (vs, ws, index) = layout(w, &[a, b, a_star])?;
    let (pa, pb, ps) = (
        Packed::new(a, &index),
        Packed::new(b, &index),
        Packed::new(a_star, &index),
    );
    let nv = vs.len();
    let lhs = exists_table(nv, ws.len(), &[pa, Packed::new(b, &index)]);
    let rhs = exists_table(nv, ws.len(), &[pb]);
    Ok((0u32..1 << nv).all(|v| lhs[v as usize] == (ps.sat(v) && rhs[v as usize])))
}

/// Whether two formulas have the same models over the union of their
/// variables (at most [`MAX_ENUM_VARS`]).
pub fn equivalent(f: &Cnf, g: &Cnf) -> Result<bool, OracleError> {
    let (vs, _, index) = layout(&[], &[f, g])?;
    let (pf, pg) = (Packed::new(f, &index), Packed::new(g, &index));
    Ok((0u32..1 << vs.len()).all(|m| pf.sat(m) == pg.sat(m)))
}

/// Complete states over a fixed list of state variables, stored as bit
/// masks (bit `i` is the value of `vars[i]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    pub vars: Vec<Var>,
    pub states: BTreeSet<u32>,
}

impl StateSet {
    pub fn contains(&self, bits: &[bool]) -> bool {
        self.states.contains(&to_mask(bits))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.states.is_subset(&other.states)
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        let n = self.vars.len();
        self.states.iter().map(move |&m| to_bits(m, n))
    }
}

pub fn to_mask(bits: &[bool]) -> u32 {
    bits.iter().enumerate().fold(0, |m, (i, &b)| m | (u32::from(b) << i))
}

pub fn to_bits(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Explicit image computation for one transition relation.
pub struct ImageOracle<'a> {
    ts: &'a TransitionSystem,
    solver: Solver,
    cache: HashMap<u32, Vec<u32>>,
}

impl<'a> ImageOracle<'a> {
    /// `trans` is a template relation over the variables of `ts`.
    pub fn new(ts: &'a TransitionSystem, trans: &Cnf) -> Result<ImageOracle<'a>, OracleError> {
        if ts.num_state() > MAX_STATE_BITS {
            return Err(OracleError::TooManyStateBits(ts.num_state()));
        }
        let mut solver = Solver::from_cnf(trans);
        for v in ts.state_vars(1) {
            solver.ensure_var(v);
        }
        Ok(ImageOracle {
            ts,
            solver,
            cache: HashMap::new(),
        })
    }

    /// All one-step successors of a state.
    pub fn successors(&mut self, s: u32) -> &[u32] {
        if !self.cache.contains_key(&s) {
            let n = self.ts.num_state();
            let act = self.solver.fresh_var();
            let mut assume = self.ts.state_cube(&to_bits(s, n), 0);
            assume.push(act.pos());
            let next = self.ts.state_vars(1);
            let mut out = Vec::new();
            while self.solver.solve(&assume) {
                let t: Vec<bool> = next.iter().map(|&v| self.solver.value(v).unwrap_or(false)).collect();
                out.push(to_mask(&t));
                let mut block: Vec<Lit> = next.iter().zip(&t).map(|(&v, &b)| Lit::new(v, !b)).collect();
                block.push(act.neg());
                self.solver.add_clause(&block);
            }
            self.solver.add_clause(&[act.neg()]);
            out.sort_unstable();
            self.cache.insert(s, out);
        }
        &self.cache[&s]
    }

    pub fn image(&mut self, set: &StateSet) -> StateSet {
        let mut states = BTreeSet::new();
        for &s in &set.states {
            states.extend(self.successors(s).iter().copied());
        }
        StateSet {
            vars: set.vars.clone(),
            states,
        }
    }
}

pub fn initial_states(ts: &TransitionSystem) -> Result<StateSet, OracleError> {
    let n = ts.num_state();
    if n > MAX_STATE_BITS {
        return Err(OracleError::TooManyStateBits(n));
    }
    let states = (0u32..1 << n)
        .filter(|&m| ts.init.evaluate(&ts.state_assignment(&to_bits(m, n), 0)) == Truth::True)
        .collect();
    Ok(StateSet {
        vars: ts.state_vars(0),
        states,
    })
}

/// Every `Reach(0..=j)`: the states reachable in at most `i` steps.
pub fn reach_sequence(ts: &TransitionSystem, j: usize) -> Result<Vec<StateSet>, OracleError> {
    let mut img = ImageOracle::new(ts, &ts.trans)?;
    let mut cur = initial_states(ts)?;
    let mut out = vec![cur.clone()];
    for _ in 0..j {
        let mut next = img.image(&cur);
        next.states.extend(cur.states.iter().copied());
        cur = next;
        out.push(cur.clone());
    }
    Ok(out)
}

pub fn reach_bruteforce(ts: &TransitionSystem, j: usize) -> Result<StateSet, OracleError> {
    Ok(reach_sequence(ts, j)?.pop().unwrap())
}

pub fn prop_holds_in(ts: &TransitionSystem, bits: &[bool]) -> bool {
    ts.prop.evaluate(&ts.state_assignment(bits, 0)) == Truth::True
}

/// The fewest steps after which a bad state is reachable, or `None` if no
/// reachable state violates the property.
pub fn first_bad_depth(ts: &TransitionSystem) -> Result<Option<usize>, OracleError> {
    let mut img = ImageOracle::new(ts, &ts.trans)?;
    let mut cur = initial_states(ts)?;
    let n = ts.num_state();
    for depth in 0.. {
        if cur.states.iter().any(|&m| !prop_holds_in(ts, &to_bits(m, n))) {
            return Ok(Some(depth));
        }
        let mut next = img.image(&cur);
        next.states.extend(cur.states.iter().copied());
        if next.states == cur.states {
            return Ok(None);
        }
        cur = next;
    }
    unreachable!()
}

/// Whether `h` (over frame-0 state variables) separates, at depth `j`, the
/// states reachable in `ts` from those reachable only when the last step
/// uses `rlx_trans`: true on `Reach(j)`, false on
/// `img_rlx(Reach(j-1)) \ Reach(j)`.
pub fn verify_boundary(h: &Cnf, ts: &TransitionSystem, rlx_trans: &Cnf, j: usize) -> Result<bool, OracleError> {
    let seq = reach_sequence(ts, j)?;
    let reach = &seq[j];
    let n = ts.num_state();
    let val = |m: u32| h.evaluate(&ts.state_assignment(&to_bits(m, n), 0)) == Truth::True;
    if !reach.states.iter().all(|&m| val(m)) {
        return Ok(false);
    }
    if j == 0 {
        return Ok(true);
    }
    let mut img = ImageOracle::new(ts, rlx_trans)?;
    let rlx = img.image(&seq[j - 1]);
    Ok(rlx
        .states
        .iter()
        .filter(|m| !reach.states.contains(m))
        .all(|&m| !val(m)))
}

/// Explicit models of a formula over `vars` (other variables existentially
/// quantified), by SAT enumeration.
pub fn project_models(f: &Cnf, vars: &[Var]) -> BTreeSet<u32> {
    let mut s = Solver::from_cnf(f);
    for &v in vars {
        s.ensure_var(v);
    }
    let mut out = BTreeSet::new();
    while s.solve(&[]) {
        let bits: Vec<bool> = vars.iter().map(|&v| s.value(v).unwrap_or(false)).collect();
        out.insert(to_mask(&bits));
        let block: Vec<Lit> = vars.iter().zip(&bits).map(|(&v, &b)| Lit::new(v, !b)).collect();
        if !s.add_clause(&block) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{add_stuttering, build_miter, encode, load, parse_circuit};
    use proptest::prelude::*;

    #[test]
    fn qe_examples() {
        let w = [Var(3)];
        assert!(qe_bruteforce(&w, &Cnf::from_dimacs(&[&[1, 3]])).unwrap().is_empty());
        assert_eq!(
            qe_bruteforce(&w, &Cnf::from_dimacs(&[&[3], &[-3]])).unwrap(),
            Cnf::from_clauses([Clause::empty()])
        );
        assert_eq!(
            qe_bruteforce(&w, &Cnf::from_dimacs(&[&[1, 3], &[2, -3]])).unwrap(),
            Cnf::from_dimacs(&[&[1, 2]])
        );
    }

    #[test]
    fn check_pqe_examples() {
        let w = [Var(3)];
        let b = Cnf::from_dimacs(&[&[2, -3]]);
        assert!(check_pqe(&w, &Cnf::new(), &b, &Cnf::new()).unwrap());
        let a = Cnf::from_dimacs(&[&[1, 3]]);
        assert!(check_pqe(&w, &a, &b, &Cnf::from_dimacs(&[&[1, 2]])).unwrap());
        assert!(!check_pqe(&w, &a, &b, &Cnf::new()).unwrap());
        assert_eq!(
            check_pqe(&w, &a, &b, &Cnf::from_dimacs(&[&[3]])),
            Err(OracleError::QuantifiedVarInAnswer(Var(3)))
        );
    }

    #[test]
    fn budget_is_enforced() {
        let f: Cnf = (1..=25).map(|v| Clause::from_dimacs(&[v])).collect();
        assert_eq!(qe_bruteforce(&[], &f), Err(OracleError::TooManyVars(25)));
    }

    const STUCK0: &str = include_str!("../fixtures/stuck0.scirc");
    const TOGGLE: &str = include_str!("../fixtures/toggle.scirc");

    #[test]
    fn reach_examples() {
        let (_, ts) = load(STUCK0).unwrap();
        let ts = add_stuttering(&ts).unwrap();
        assert_eq!(reach_bruteforce(&ts, 0).unwrap().states, [0].into());
        assert_eq!(reach_bruteforce(&ts, 3).unwrap().states, [0].into());
        let (_, ts) = load(TOGGLE).unwrap();
        let ts = add_stuttering(&ts).unwrap();
        assert_eq!(reach_bruteforce(&ts, 1).unwrap().states, [0, 1].into());
    }

    #[test]
    fn verify_boundary_stuck0() {
        let (_, ts) = load(STUCK0).unwrap();
        let s0 = ts.state_vars(0)[0];
        let s1 = ts.state_vars(1)[0];
        let dropped = Clause::new([s1.neg(), s0.pos()]).unwrap();
        let rlx: Cnf = ts.trans.iter().filter(|c| **c != dropped).cloned().collect();
        assert_eq!(rlx.len() + 1, ts.trans.len());
        let h = Cnf::from_clauses([Clause::new([s0.neg()]).unwrap()]);
        assert!(verify_boundary(&h, &ts, &rlx, 1).unwrap());
        assert!(!verify_boundary(&Cnf::new(), &ts, &rlx, 1).unwrap());
    }

    #[test]
    fn verify_boundary_dff_miter() {
        let n = parse_circuit(include_str!("../fixtures/dff.scirc")).unwrap();
        let (m, p) = build_miter(&n, &n).unwrap();
        let ts = add_stuttering(&encode(&m, &p).unwrap()).unwrap();
        let iface = ts.tagged(crate::circuit::INTERFACE_TAG);
        let rlx: Cnf = (0..ts.trans.len())
            .filter(|i| !iface.contains(i))
            .map(|i| ts.trans.clauses()[i].clone())
            .collect();
        let s = ts.state_vars(0);
        let eq = Cnf::from_clauses([
            Clause::new([s[0].neg(), s[1].pos()]).unwrap(),
            Clause::new([s[0].pos(), s[1].neg()]).unwrap(),
        ]);
        assert!(verify_boundary(&eq, &ts, &rlx, 1).unwrap());
        assert!(!verify_boundary(&Cnf::new(), &ts, &rlx, 1).unwrap());
    }

    #[test]
    fn bad_depths() {
        let (_, ts) = load(TOGGLE).unwrap();
        assert_eq!(first_bad_depth(&ts).unwrap(), Some(1));
        let (_, ts) = load(STUCK0).unwrap();
        assert_eq!(first_bad_depth(&ts).unwrap(), None);
        let (_, ts) = load(include_str!("../fixtures/counter2.scirc")).unwrap();
        assert_eq!(first_bad_depth(&ts).unwrap(), Some(3));
        let (_, ts) = load(include_str!("../fixtures/shift3.scirc")).unwrap();
        assert_eq!(first_bad_depth(&ts).unwrap(), None);
    }

    fn arb_cnf(nvars: u32) -> impl Strategy<Value = Cnf> {
        let clause = proptest::collection::btree_map(1..=nvars, any::<bool>(), 1..4)
            .prop_map(|m| Clause::new(m.into_iter().map(|(v, b)| Lit::new(Var(v), b))).unwrap());
        proptest::collection::vec(clause, 0..10).prop_map(Cnf::from_clauses)
    }

    proptest! {
        #[test]
        fn qe_matches_direct_models(f in arb_cnf(6), wmask in 0u32..64) {
            let w: Vec<Var> = (1..=6).filter(|i| wmask >> (i - 1) & 1 == 1).map(Var).collect();
            let q = qe_bruteforce(&w, &f).unwrap();
            prop_assert!(q.vars().iter().all(|v| !w.contains(v)));
            // ∃W f ≡ q: q's models, padded with any W values, must extend to f models.
            let free: Vec<Var> = f.vars().into_iter().filter(|v| !w.contains(v)).collect();
            let proj = project_models(&f, &free);
            let qm: BTreeSet<u32> = (0u32..1 << free.len())
                .filter(|&m| q.evaluate(&crate::cnf::Assignment::from_pairs(
                    free.iter().enumerate().map(|(i, &v)| (v, m >> i & 1 == 1)))) == Truth::True)
                .collect();
            prop_assert_eq!(proj, qm);
        }

        #[test]
        fn qe_answer_passes_check_pqe(a in arb_cnf(6), b in arb_cnf(6), wmask in 0u32..64) {
            let w: Vec<Var> = (1..=6).filter(|i| wmask >> (i - 1) & 1 == 1).map(Var).collect();
            let mut ab = a.clone();
            ab.extend(&b);
            let full = qe_bruteforce(&w, &ab).unwrap();
            prop_assert!(check_pqe(&w, &a, &b, &full).unwrap());
        }
    }
}
