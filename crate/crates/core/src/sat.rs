//! CDCL satisfiability with assumptions and unsat cores, plus a greedy
//! soft-clause relaxation search.
//!
//! Branching follows variable activity with ties going to the lowest id;
//! the first value tried is positive, later the saved phase.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::cnf::{Assignment, Clause, Cnf, Lit, Var};

/// Ids handed out by [`Solver::fresh_var`] start here, far above any id a
/// variable table produces at desk scale.
pub const FRESH_VAR_BASE: u32 = 0x4000_0000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error("hard clauses together with the target are unsatisfiable")]
    TargetUnreachable,
}

#[derive(Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

struct ClauseRec {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    act: f64,
    var: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.act
            .total_cmp(&other.act)
            .then_with(|| other.var.cmp(&self.var))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lit_val(assigns: &[Option<bool>], l: Lit) -> Option<bool> {
    assigns[l.var().0 as usize].map(|b| b == l.is_positive())
}

fn luby(mut x: u64) -> u64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

/// An incremental solver. Clauses are added over caller variables; the
/// solver keeps its own dense numbering internally.
pub struct Solver {
    ext2int: HashMap<Var, u32>,
    int2ext: Vec<Var>,
    next_fresh: u32,
    clauses: Vec<ClauseRec>,
    watches: Vec<Vec<Watch>>,
    assigns: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    heap: BinaryHeap<HeapEntry>,
    var_inc: f64,
    cla_inc: f64,
    num_learnts: usize,
    max_learnts: f64,
    ok: bool,
    model: Vec<Option<bool>>,
    core: Vec<Lit>,
    conflicts: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            ext2int: HashMap::new(),
            int2ext: Vec::new(),
            next_fresh: FRESH_VAR_BASE,
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            heap: BinaryHeap::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            num_learnts: 0,
            max_learnts: 2000.0,
            ok: true,
            model: Vec::new(),
            core: Vec::new(),
            conflicts: 0,
        }
    }

    pub fn from_cnf(f: &Cnf) -> Solver {
        let mut s = Solver::new();
        s.add_cnf(f);
        s
    }

    /// Total conflicts seen over the solver's lifetime.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    fn int_var(&mut self, v: Var) -> u32 {
        if let Some(&i) = self.ext2int.get(&v) {
            return i;
        }
        let i = self.int2ext.len() as u32;
        self.ext2int.insert(v, i);
        self.int2ext.push(v);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.assigns.push(None);
        self.level.push(0);
        self.reason.push(None);
        self.phase.push(true);
        self.activity.push(0.0);
        self.seen.push(false);
        self.heap.push(HeapEntry { act: 0.0, var: i });
        i
    }

    fn int_lit(&mut self, l: Lit) -> Lit {
        Lit::new(Var(self.int_var(l.var())), l.is_positive())
    }

    fn ext_lit(&self, l: Lit) -> Lit {
        Lit::new(self.int2ext[l.var().0 as usize], l.is_positive())
    }

    /// A variable guaranteed not to clash with caller ids below
    /// [`FRESH_VAR_BASE`].
    pub fn fresh_var(&mut self) -> Var {
        let v = Var(self.next_fresh);
        self.next_fresh += 1;
        self.int_var(v);
        v
    }

    /// Registers a variable so that it receives a model value even if it
    /// occurs in no clause.
    pub fn ensure_var(&mut self, v: Var) {
        self.int_var(v);
    }

    pub fn add_cnf(&mut self, f: &Cnf) {
        for c in f {
            self.add_clause(c.lits());
        }
    }

    /// Adds a clause; literals may repeat and tautologies are ignored.
    /// Returns false once the clause set is known unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        let mut ls: Vec<Lit> = lits.iter().map(|&l| self.int_lit(l)).collect();
        ls.sort_unstable();
        ls.dedup();
        let mut kept = Vec::with_capacity(ls.len());
        for (i, &l) in ls.iter().enumerate() {
            if i + 1 < ls.len() && ls[i + 1] == !l {
                return true;
            }
            match lit_val(&self.assigns, l) {
                Some(true) => return true,
                Some(false) => {}
                None => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(kept[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(kept, false);
            }
        }
        self.ok
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].code()].push(Watch { cref, blocker: lits[1] });
        self.watches[lits[1].code()].push(Watch { cref, blocker: lits[0] });
        if learnt {
            self.num_learnts += 1;
        }
        self.clauses.push(ClauseRec {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        cref
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var().0 as usize;
        debug_assert!(self.assigns[v].is_none());
        self.assigns[v] = Some(l.is_positive());
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let stop = self.trail_lim[lvl];
        for i in (stop..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            self.phase[v] = l.is_positive();
            self.assigns[v] = None;
            self.reason[v] = None;
            self.heap.push(HeapEntry {
                act: self.activity[v],
                var: v as u32,
            });
        }
        self.trail.truncate(stop);
        self.trail_lim.truncate(lvl);
        self.qhead = stop;
    }

    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if lit_val(&self.assigns, w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let c = &mut self.clauses[cref as usize].lits;
                if c[0] == false_lit {
                    c.swap(0, 1);
                }
                let first = c[0];
                if first != w.blocker && lit_val(&self.assigns, first) == Some(true) {
                    ws[j] = Watch { cref, blocker: first };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.len() {
                    if lit_val(&self.assigns, c[k]) != Some(false) {
                        c.swap(1, k);
                        self.watches[c[1].code()].push(Watch { cref, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watch { cref, blocker: first };
                j += 1;
                if lit_val(&self.assigns, first) == Some(false) {
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                    conflict = Some(cref);
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
            self.rebuild_heap();
        } else if self.assigns[v].is_none() {
            self.heap.push(HeapEntry {
                act: self.activity[v],
                var: v as u32,
            });
        }
    }

    fn rebuild_heap(&mut self) {
        self.heap = (0..self.assigns.len())
            .filter(|&v| self.assigns[v].is_none())
            .map(|v| HeapEntry {
                act: self.activity[v],
                var: v as u32,
            })
            .collect();
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in &mut self.clauses {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit::new(Var(0), true)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level() as u32;
        loop {
            self.bump_clause(confl);
            let start = usize::from(p.is_some());
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= dl {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().0 as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            let v = pl.var().0 as usize;
            self.seen[v] = false;
            path -= 1;
            p = Some(pl);
            if path == 0 {
                break;
            }
            confl = self.reason[v].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Drop literals whose reason is covered by the rest of the clause.
        let mut out = vec![learnt[0]];
        for &q in &learnt[1..] {
            let v = q.var().0 as usize;
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|l| {
                    let u = l.var().0 as usize;
                    self.seen[u] || self.level[u] == 0
                }),
            };
            if !redundant {
                out.push(q);
            }
        }
        for &q in &learnt[1..] {
            self.seen[q.var().0 as usize] = false;
        }

        let mut bt = 0;
        if out.len() > 1 {
            let mut max_i = 1;
            for i in 2..out.len() {
                if self.level[out[i].var().0 as usize] > self.level[out[max_i].var().0 as usize] {
                    max_i = i;
                }
            }
            out.swap(1, max_i);
            bt = self.level[out[1].var().0 as usize] as usize;
        }
        (out, bt)
    }

    /// Collects the assumptions responsible for `failed` (an assumption
    /// that is currently false).
    fn analyze_final(&mut self, failed: Lit) {
        self.core.clear();
        self.core.push(self.ext_lit(failed));
        let fv = failed.var().0 as usize;
        if self.level[fv] == 0 {
            return;
        }
        self.seen[fv] = true;
        let stop = self.trail_lim[0];
        for i in (stop..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => {
                    let e = self.ext_lit(l);
                    self.core.push(e);
                }
                Some(r) => {
                    for k in 1..self.clauses[r as usize].lits.len() {
                        let u = self.clauses[r as usize].lits[k].var().0 as usize;
                        if self.level[u] > 0 {
                            self.seen[u] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[fv] = false;
        self.core.sort_unstable();
        self.core.dedup();
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(e) = self.heap.pop() {
            let v = e.var as usize;
            if self.assigns[v].is_none() && e.act == self.activity[v] {
                return Some(Lit::new(Var(e.var), self.phase[v]));
            }
        }
        None
    }

    fn locked(&self, cref: u32) -> bool {
        let c = &self.clauses[cref as usize];
        let v = c.lits[0].var().0 as usize;
        self.reason[v] == Some(cref) && lit_val(&self.assigns, c.lits[0]) == Some(true)
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&i| {
                let c = &self.clauses[i as usize];
                c.learnt && !c.deleted && c.lits.len() > 2 && !self.locked(i)
            })
            .collect();
        cands.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .total_cmp(&self.clauses[b as usize].activity)
        });
        for &i in &cands[..cands.len() / 2] {
            let c = &mut self.clauses[i as usize];
            c.deleted = true;
            c.lits = Vec::new();
            self.num_learnts -= 1;
        }
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn search(&mut self, budget: u64, assumps: &[Lit]) -> Option<bool> {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                conflicts += 1;
                self.conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(false);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                continue;
            }
            if conflicts >= budget {
                self.cancel_until(0);
                return None;
            }
            if self.num_learnts as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
            }
            if self.heap.len() > 4 * self.assigns.len() + 64 {
                self.rebuild_heap();
            }
            let mut next = None;
            while self.decision_level() < assumps.len() {
                let a = assumps[self.decision_level()];
                match lit_val(&self.assigns, a) {
                    Some(true) => self.trail_lim.push(self.trail.len()),
                    Some(false) => {
                        self.analyze_final(a);
                        return Some(false);
                    }
                    None => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let next = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => l,
                    None => return Some(true),
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, None);
        }
    }

    /// Decides the clause set under `assumptions`. After `true`, model
    /// values are available through [`Solver::value`]; after `false`,
    /// [`Solver::core`] is a subset of the assumptions that is already
    /// inconsistent with the clauses.
    pub fn solve(&mut self, assumptions: &[Lit]) -> bool {
        self.model.clear();
        self.core.clear();
        if !self.ok {
            return false;
        }
        let assumps: Vec<Lit> = assumptions.iter().map(|&l| self.int_lit(l)).collect();
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return false;
        }
        let mut restart = 0u64;
        loop {
            let budget = luby(restart) * 100;
            match self.search(budget, &assumps) {
                Some(true) => {
                    self.model = self.assigns.clone();
                    self.cancel_until(0);
                    return true;
                }
                Some(false) => {
                    self.cancel_until(0);
                    return false;
                }
                None => {
                    restart += 1;
                    self.max_learnts *= 1.05;
                }
            }
        }
    }

    /// Model value after a satisfiable call; `None` for unknown variables.
    pub fn value(&self, v: Var) -> Option<bool> {
        let i = *self.ext2int.get(&v)?;
        self.model.get(i as usize).copied().flatten()
    }

    pub fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value(l.var()).map(|b| b == l.is_positive())
    }

    /// The model restricted to `vars` (variables unknown to the solver are
    /// reported false).
    pub fn model_over(&self, vars: impl IntoIterator<Item = Var>) -> Assignment {
        Assignment::from_pairs(vars.into_iter().map(|v| (v, self.value(v).unwrap_or(false))))
    }

    /// The model over every caller variable below [`FRESH_VAR_BASE`].
    pub fn model(&self) -> Assignment {
        Assignment::from_pairs(
            self.int2ext
                .iter()
                .enumerate()
                .filter(|(_, v)| v.0 < FRESH_VAR_BASE)
                .filter_map(|(i, &v)| self.model.get(i).copied().flatten().map(|b| (v, b))),
        )
    }

    pub fn core(&self) -> &[Lit] {
        &self.core
    }

    pub fn is_ok(&self) -> bool {
        self.ok
    }
}

/// Result of a one-shot satisfiability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// A model complete over the formula and assumption variables.
    Sat(Assignment),
    /// A subset of the assumptions inconsistent with the formula.
    Unsat(Vec<Lit>),
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

pub fn solve(f: &Cnf, assumptions: &[Lit]) -> SatResult {
    let mut s = Solver::from_cnf(f);
    for v in f.vars() {
        s.ensure_var(v);
    }
    if s.solve(assumptions) {
        SatResult::Sat(s.model())
    } else {
        SatResult::Unsat(s.core().to_vec())
    }
}

pub fn is_sat(f: &Cnf) -> bool {
    Solver::from_cnf(f).solve(&[])
}

/// True iff every clause of `b` is implied by `a`.
pub fn implies(a: &Cnf, b: &Cnf) -> bool {
    let mut s = Solver::from_cnf(a);
    b.iter().all(|c| implies_clause(&mut s, c))
}

/// True iff the clauses loaded in `s` imply `c`.
pub fn implies_clause(s: &mut Solver, c: &Clause) -> bool {
    let neg: Vec<Lit> = c.lits().iter().map(|&l| !l).collect();
    !s.solve(&neg)
}

/// Outcome of [`max_relax_solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxResult {
    pub model: Assignment,
    /// Indices into the soft clauses, ascending.
    pub falsified_soft: Vec<usize>,
}

/// Finds a model of `hard` agreeing with `target` that falsifies a locally
/// minimal set of `soft` clauses: re-enforcing any single falsified clause
/// makes the query unsatisfiable.
pub fn max_relax_solve(hard: &Cnf, soft: &Cnf, target: &Assignment) -> Result<RelaxResult, SatError> {
    let mut s = Solver::from_cnf(hard);
    let sel: Vec<Var> = soft
        .iter()
        .map(|c| {
            let e = s.fresh_var();
            let mut lits = c.lits().to_vec();
            lits.push(e.neg());
            s.add_clause(&lits);
            e
        })
        .collect();
    for v in hard.vars().into_iter().chain(soft.vars()) {
        s.ensure_var(v);
    }
    let tgt = target.lits();
    let assume = |s: &mut Solver, enforce: &dyn Fn(usize) -> bool| {
        let mut a = tgt.clone();
        a.extend((0..sel.len()).filter(|&i| enforce(i)).map(|i| sel[i].pos()));
        s.solve(&a)
    };
    let falsified = |s: &Solver| -> Vec<usize> {
        (0..soft.len())
            .filter(|&i| soft.clauses()[i].lits().iter().all(|&l| s.lit_value(l) == Some(false)))
            .collect()
    };
    if !assume(&mut s, &|_| true) && !assume(&mut s, &|_| false) {
        return Err(SatError::TargetUnreachable);
    }
    let mut f = falsified(&s);
    let mut model = s.model();
    'improve: loop {
        for &i in &f {
            let cur = f.clone();
            if assume(&mut s, &|j| j == i || cur.binary_search(&j).is_err()) {
                let g = falsified(&s);
                debug_assert!(g.len() < f.len());
                f = g;
                model = s.model();
                continue 'improve;
            }
        }
        break;
    }
    debug_assert!(relax_is_locally_minimal(hard, soft, target, &f));
    Ok(RelaxResult {
        model,
        falsified_soft: f,
    })
}

fn relax_is_locally_minimal(hard: &Cnf, soft: &Cnf, target: &Assignment, f: &[usize]) -> bool {
    f.iter().all(|&i| {
        let mut q = hard.clone();
        for (j, c) in soft.iter().enumerate() {
            if j == i || !f.contains(&j) {
                q.push(c.clone());
            }
        }
        !solve(&q, &target.lits()).is_sat()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::Truth;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lit(x: i64) -> Lit {
        Lit::from_dimacs(x).unwrap()
    }

    #[test]
    fn solve_examples() {
        match solve(&Cnf::from_dimacs(&[&[1]]), &[]) {
            SatResult::Sat(m) => assert_eq!(m.get(Var(1)), Some(true)),
            r => panic!("{r:?}"),
        }
        assert_eq!(solve(&Cnf::from_dimacs(&[&[1], &[-1]]), &[]), SatResult::Unsat(vec![]));
        match solve(&Cnf::from_dimacs(&[&[1, 2]]), &[lit(-1), lit(-2)]) {
            SatResult::Unsat(core) => {
                assert!(!core.is_empty());
                assert!(core.iter().all(|l| [lit(-1), lit(-2)].contains(l)));
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn implies_examples() {
        assert!(implies(&Cnf::from_dimacs(&[&[-1]]), &Cnf::from_dimacs(&[&[-1, 2]])));
        assert!(!implies(&Cnf::new(), &Cnf::from_dimacs(&[&[1]])));
        assert!(implies(&Cnf::from_dimacs(&[&[1], &[2]]), &Cnf::from_dimacs(&[&[1, 2]])));
        assert!(!implies(&Cnf::new(), &Cnf::from_clauses([Clause::empty()])));
        assert!(implies(&Cnf::from_dimacs(&[&[1], &[-1]]), &Cnf::from_clauses([Clause::empty()])));
    }

    #[test]
    fn max_relax_examples() {
        let s1 = 1;
        let r = max_relax_solve(
            &Cnf::new(),
            &Cnf::from_dimacs(&[&[-s1]]),
            &Assignment::from_lits([lit(s1)]),
        )
        .unwrap();
        assert_eq!(r.falsified_soft, vec![0]);

        let x0 = 2;
        let r = max_relax_solve(
            &Cnf::from_dimacs(&[&[x0, s1]]),
            &Cnf::from_dimacs(&[&[-s1]]),
            &Assignment::from_lits([lit(-s1)]),
        )
        .unwrap();
        assert!(r.falsified_soft.is_empty());
        assert_eq!(r.model.get(Var(2)), Some(true));
    }

    #[test]
    fn max_relax_stuck_at_zero() {
        // s0 = 1, x0 = 2, s1 = 3; s1 == s0 AND x0
        let (s0, x0, s1) = (1, 2, 3);
        let hard = Cnf::from_dimacs(&[&[-s1, x0], &[s1, -s0, -x0]]);
        let soft = Cnf::from_dimacs(&[&[-s1, s0]]);
        let target = Assignment::from_lits([lit(-s0), lit(s1)]);
        // Oracle: with s0 = 0 and s1 = 1 every x0 falsifies the soft clause.
        for x in [false, true] {
            let a = target.union(&Assignment::from_pairs([(Var(x0 as u32), x)]));
            assert_eq!(soft.evaluate(&a), Truth::False);
        }
        let r = max_relax_solve(&hard, &soft, &target).unwrap();
        assert_eq!(r.falsified_soft, vec![0]);
        assert_eq!(hard.evaluate(&r.model), Truth::True);
    }

    #[test]
    fn max_relax_rejects_unreachable_target() {
        let r = max_relax_solve(
            &Cnf::from_dimacs(&[&[-1]]),
            &Cnf::new(),
            &Assignment::from_lits([lit(1)]),
        );
        assert_eq!(r, Err(SatError::TargetUnreachable));
    }

    #[test]
    fn incremental_use_keeps_learnt_facts_sound() {
        let mut s = Solver::new();
        s.add_clause(&[lit(1), lit(2)]);
        assert!(s.solve(&[lit(-1)]));
        assert_eq!(s.value(Var(2)), Some(true));
        s.add_clause(&[lit(-2)]);
        assert!(!s.solve(&[lit(-1)]));
        assert_eq!(s.core(), &[lit(-1)]);
        assert!(s.solve(&[]));
        assert_eq!(s.value(Var(1)), Some(true));
    }

    #[test]
    fn fresh_vars_do_not_collide() {
        let mut s = Solver::new();
        let e = s.fresh_var();
        assert!(e.0 >= FRESH_VAR_BASE);
        s.add_clause(&[e.pos()]);
        assert!(s.solve(&[]));
        assert!(s.model().get(e).is_none());
        assert_eq!(s.value(e), Some(true));
    }

    #[test]
    fn pigeonhole_is_unsat() {
        // 6 pigeons into 5 holes.
        let (p, h) = (6i64, 5i64);
        let v = |i: i64, j: i64| i * h + j + 1;
        let mut f = Cnf::new();
        for i in 0..p {
            f.push(Clause::from_dimacs(&(0..h).map(|j| v(i, j)).collect::<Vec<_>>()));
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    f.push(Clause::from_dimacs(&[-v(a, j), -v(b, j)]));
                }
            }
        }
        assert!(!is_sat(&f));
    }

    fn truth_table_sat(f: &Cnf, nvars: u32) -> bool {
        (0u32..1 << nvars).any(|bits| {
            let a = Assignment::from_pairs((1..=nvars).map(|v| (Var(v), bits >> (v - 1) & 1 == 1)));
            f.evaluate(&a) == Truth::True
        })
    }

    fn random_cnf(rng: &mut ChaCha8Rng, nvars: u32, nclauses: usize) -> Cnf {
        (0..nclauses)
            .map(|_| {
                let len = rng.gen_range(1..=3);
                let mut lits = Vec::new();
                for _ in 0..len {
                    let v = rng.gen_range(1..=nvars);
                    if lits.iter().all(|l: &Lit| l.var() != Var(v)) {
                        lits.push(Lit::new(Var(v), rng.gen()));
                    }
                }
                Clause::new(lits).unwrap()
            })
            .collect()
    }

    #[test]
    fn agrees_with_truth_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..=10);
            let m = rng.gen_range(0..=(5 * n as usize));
            let f = random_cnf(&mut rng, n, m);
            let expect = truth_table_sat(&f, n);
            match solve(&f, &[]) {
                SatResult::Sat(model) => {
                    assert!(expect);
                    assert_eq!(f.evaluate(&model), Truth::True);
                }
                SatResult::Unsat(_) => assert!(!expect, "{f:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn cores_are_unsat_and_models_satisfy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(0..20);
            let f = random_cnf(&mut rng, n, m);
            let mut assumps: Vec<Lit> = Vec::new();
            for v in 1..=n {
                if rng.gen_bool(0.5) {
                    assumps.push(Lit::new(Var(v), rng.gen()));
                }
            }
            match solve(&f, &assumps) {
                SatResult::Sat(m) => {
                    prop_assert_eq!(f.evaluate(&m), Truth::True);
                    for l in &assumps {
                        prop_assert_eq!(m.lit_value(*l), Some(true));
                    }
                }
                SatResult::Unsat(core) => {
                    prop_assert!(core.iter().all(|l| assumps.contains(l)));
                    let mut g = f.clone();
                    for l in &core {
                        g.push(Clause::new([*l]).unwrap());
                    }
                    prop_assert!(!truth_table_sat(&g, n));
                }
            }
        }

        #[test]
        fn max_relax_is_locally_minimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=7);
            let (mh, ms) = (rng.gen_range(0..4), rng.gen_range(0..8));
            let hard = random_cnf(&mut rng, n, mh);
            let soft = random_cnf(&mut rng, n, ms);
            let target = Assignment::from_pairs([(Var(1), rng.gen())]);
            let mut q = hard.clone();
            q.push(Clause::new(target.lits()).unwrap());
            match max_relax_solve(&hard, &soft, &target) {
                Ok(r) => {
                    prop_assert_eq!(hard.evaluate(&r.model), Truth::True);
                    prop_assert_eq!(r.model.get(Var(1)), target.get(Var(1)));
                    let fals: Vec<usize> = (0..soft.len())
                        .filter(|&i| soft.clauses()[i].eval(&r.model) == Truth::False)
                        .collect();
                    prop_assert_eq!(&fals, &r.falsified_soft);
                    prop_assert!(relax_is_locally_minimal(&hard, &soft, &target, &r.falsified_soft));
                }
                Err(_) => prop_assert!(!truth_table_sat(&q, n)),
            }
        }
    }
}
