//! Chains of per-frame formulas `H_0 .. H_j` over the state variables, each
//! paired with a relaxed copy of the transition relation.
//!
//! The chain keeps one fact true at all times: projecting
//! `I@0 ∧ H_1@1 ∧ .. ∧ H_k@k ∧ T^rlx_0@0 ∧ .. ∧ T^rlx_{k-1}@(k-1)` onto the
//! frame-`k` state variables gives exactly the states reachable in `k` steps.
//! Relaxing a transition removes clauses; the clauses produced by
//! [`FrameChain::makeup_clauses`] restore the projection.

use std::collections::BTreeSet;

use crate::circuit::{TransitionSystem, STUTTER_TAG};
use crate::cnf::{Clause, Cnf, Lit};
use crate::pqe::{take_out, PqeError, PqeOptions, PqeTask};
use crate::sat::{implies, Solver};

#[derive(Debug, Clone)]
pub struct FrameChain {
    pub ts: TransitionSystem,
    pub pqe: PqeOptions,
    /// `frames[0]` is the initial-state formula.
    frames: Vec<Cnf>,
    /// Indices into `ts.trans` removed from the step `k -> k + 1`.
    removed: Vec<BTreeSet<usize>>,
    /// `(k, C)`: `H_k` implies `C`. Frames only get stronger, so entries
    /// never go stale.
    implied: BTreeSet<(usize, Clause)>,
    pqe_nodes: u64,
}

/// Outcome of the four per-frame checks of [`FrameChain::check_co`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameCo {
    pub k: usize,
    /// `I -> H_k`.
    pub init: bool,
    /// `H_k -> P`.
    pub prop: bool,
    /// `H_{k-1} ∧ T^rlx_{k-1} -> H_k'`; `None` for frame 0.
    pub step: Option<bool>,
    /// `H_{k-1} -> H_k`; `None` for frame 0.
    pub mono: Option<bool>,
}

impl FrameCo {
    pub fn passes(&self) -> bool {
        self.init && self.prop && self.step != Some(false) && self.mono != Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoReport {
    pub frames: Vec<FrameCo>,
}

impl CoReport {
    pub fn passes(&self) -> bool {
        self.frames.iter().all(FrameCo::passes)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.frames {
            let checks = [
                (Some(f.init), 1),
                (Some(f.prop), 2),
                (f.step, 3),
                (f.mono, 4),
            ];
            for (ok, n) in checks {
                if ok == Some(false) {
                    out.push(format!("frame {}: condition {n}", f.k));
                }
            }
        }
        out
    }
}

/// Adds `¬f` to a solver using one fresh selector per clause. Returns false
/// when `f` is empty, since its negation is unsatisfiable.
pub fn add_negation(s: &mut Solver, f: &Cnf) -> bool {
    let mut some = Vec::with_capacity(f.len());
    for c in f.iter() {
        let d = s.fresh_var();
        for &l in c.lits() {
            s.add_clause(&[d.neg(), !l]);
        }
        some.push(d.pos());
    }
    s.add_clause(&some)
}

impl FrameChain {
    /// A chain holding only `H_0 = I`.
    pub fn new(ts: TransitionSystem, pqe: PqeOptions) -> FrameChain {
        FrameChain {
            frames: vec![ts.init.clone()],
            removed: Vec::new(),
            implied: BTreeSet::new(),
            pqe_nodes: 0,
            ts,
            pqe,
        }
    }

    /// Index `j` of the last frame.
    pub fn depth(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn frame(&self, k: usize) -> &Cnf {
        &self.frames[k]
    }

    pub fn frames(&self) -> &[Cnf] {
        &self.frames
    }

    /// Branch nodes spent in partial quantifier elimination so far.
    pub fn pqe_nodes(&self) -> u64 {
        self.pqe_nodes
    }

    /// Clause indices removed from the step `k -> k + 1`.
    pub fn removed(&self, k: usize) -> &BTreeSet<usize> {
        &self.removed[k]
    }

    /// Template copy of the relaxed step `k -> k + 1`.
    pub fn rlx_trans(&self, k: usize) -> Cnf {
        self.rlx_trans_without(k, &BTreeSet::new())
    }

    fn rlx_trans_without(&self, k: usize, skip: &BTreeSet<usize>) -> Cnf {
        let r = &self.removed[k];
        Cnf::from_clauses(
            self.ts
                .trans
                .iter()
                .enumerate()
                .filter(|(i, _)| !r.contains(i) && !skip.contains(i))
                .map(|(_, c)| c.clone()),
        )
    }

    /// Indices of clauses still present in the step `k -> k + 1` that the
    /// relaxation may drop (everything except the stuttering clauses).
    pub fn relaxable(&self, k: usize) -> Vec<usize> {
        (0..self.ts.trans.len())
            .filter(|i| !self.removed[k].contains(i))
            .filter(|&i| self.ts.trans_tags[i].as_deref() != Some(STUTTER_TAG))
            .collect()
    }

    /// Appends `H_{j+1} = true` with an unrelaxed step into it.
    pub fn push_frame(&mut self) {
        self.frames.push(Cnf::new());
        self.removed.push(BTreeSet::new());
    }

    /// Conjoins a template clause to `H_k`. Returns false if it was there.
    pub fn add_clause(&mut self, k: usize, c: Clause) -> bool {
        if self.frames[k].contains(&c) {
            return false;
        }
        self.implied.insert((k, c.clone()));
        self.frames[k].push(c);
        true
    }

    pub fn add_clauses(&mut self, k: usize, f: &Cnf) -> usize {
        f.iter().filter(|c| self.add_clause(k, (*c).clone())).count()
    }

    /// Drops clauses from the step `k -> k + 1` without compensation.
    pub fn relax(&mut self, k: usize, idx: impl IntoIterator<Item = usize>) {
        self.removed[k].extend(idx);
    }

    /// Puts removed clauses back into the step `k -> k + 1`.
    pub fn restore(&mut self, k: usize, idx: impl IntoIterator<Item = usize>) {
        for i in idx {
            self.removed[k].remove(&i);
        }
    }

    /// `I@0 ∧ H_1@1 ∧ .. ∧ H_k@k` and the relaxed steps between them.
    pub fn unrolled(&self, k: usize) -> Cnf {
        let mut f = self.ts.init.clone();
        for m in 1..=k {
            f.extend(&self.ts.shift(&self.frames[m], m as u32));
            f.extend(&self.ts.shift(&self.rlx_trans(m - 1), (m - 1) as u32));
        }
        f
    }

    /// Whether `H_k` implies template clause `c`, consulting the cache.
    pub fn frame_implies(&mut self, k: usize, c: &Clause) -> bool {
        let key = (k, c.clone());
        if self.implied.contains(&key) {
            return true;
        }
        if implies(&self.frames[k], &Cnf::from_clauses([c.clone()])) {
            self.implied.insert(key);
            return true;
        }
        false
    }
}

impl FrameChain {
    /// The task that takes clauses `r_new` of the step `k-1 -> k` out of
    /// `∃W[I@0 ∧ H_1..H_k ∧ T^rlx_0..T^rlx_{k-1}]`, where `W` holds every
    /// variable of frames `0..k-1`. The free variables are the frame-`k`
    /// state variables.
    pub fn unrolled_lhs(&self, k: usize, r_new: &BTreeSet<usize>) -> PqeTask {
        assert!(k >= 1 && k <= self.depth(), "frame {k} out of range");
        let live: BTreeSet<usize> = r_new
            .iter()
            .copied()
            .filter(|i| !self.removed[k - 1].contains(i))
            .collect();
        let last = (k - 1) as u32;
        let a = Cnf::from_clauses(live.iter().map(|&i| self.ts.shift_clause(&self.ts.trans.clauses()[i], last)));
        let mut b = self.ts.init.clone();
        for m in 1..=k {
            b.extend(&self.ts.shift(&self.frames[m], m as u32));
            let step = if m == k {
                self.rlx_trans_without(m - 1, &live)
            } else {
                self.rlx_trans(m - 1)
            };
            b.extend(&self.ts.shift(&step, (m - 1) as u32));
        }
        let w = (0..k as u32).flat_map(|f| self.ts.frame_vars(f));
        PqeTask::new(w, a, b)
    }

    /// Template clauses over the state variables that, conjoined to `H_k`,
    /// make up for removing `r_new` from the step `k-1 -> k`. Does not
    /// change the chain.
    pub fn makeup_clauses(&mut self, k: usize, r_new: &BTreeSet<usize>) -> Result<Cnf, PqeError> {
        let task = self.unrolled_lhs(k, r_new);
        if task.a.is_empty() {
            return Ok(Cnf::new());
        }
        let out = take_out(&task, &self.pqe)?;
        self.pqe_nodes += out.nodes;
        Ok(self.ts.unshift(&out.a_star, k as u32))
    }

    /// Removes `r_new` from the step `k-1 -> k` and conjoins the makeup
    /// clauses to `H_k`. Returns the makeup clauses.
    pub fn relax_with_makeup(&mut self, k: usize, r_new: &BTreeSet<usize>) -> Result<Cnf, PqeError> {
        let g = self.makeup_clauses(k, r_new)?;
        self.relax(k - 1, r_new.iter().copied());
        self.add_clauses(k, &g);
        Ok(g)
    }

    /// Checks, for every frame `k`: `I -> H_k`, `H_k -> P`,
    /// `H_{k-1} ∧ T^rlx_{k-1} -> H_k'` and `H_{k-1} -> H_k`.
    pub fn check_co(&self) -> CoReport {
        let ts = &self.ts;
        let mut frames = Vec::new();
        for (k, h) in self.frames.iter().enumerate() {
            let init = implies(&ts.init, h);
            let prop = implies(h, &ts.prop);
            let (step, mono) = if k == 0 {
                (None, None)
            } else {
                let prev = &self.frames[k - 1];
                let mut s = Solver::from_cnf(prev);
                s.add_cnf(&self.rlx_trans(k - 1));
                let sat = add_negation(&mut s, &ts.shift(h, 1)) && s.solve(&[]);
                (Some(!sat), Some(implies(prev, h)))
            };
            frames.push(FrameCo {
                k,
                init,
                prop,
                step,
                mono,
            });
        }
        CoReport { frames }
    }

    /// Looks for the first `m` with `H_m -> H_{m-1}` and returns `H_{m-1}`.
    /// Combined with the step condition this makes `H_{m-1}` inductive.
    pub fn detect_invariant(&mut self) -> Option<(usize, Cnf)> {
        for m in 1..=self.depth() {
            let prev = self.frames[m - 1].clone();
            if prev.iter().all(|c| self.frame_implies(m, c)) {
                return Some((m - 1, prev));
            }
        }
        None
    }
}

/// Negation of a state as a clause over template state variables.
pub fn block_clause(ts: &TransitionSystem, bits: &[bool]) -> Clause {
    Clause::new(ts.state_cube(bits, 0).into_iter().map(|l: Lit| !l)).expect("distinct variables")
}
