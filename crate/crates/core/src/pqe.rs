//! Partial quantifier elimination: given `∃W[A ∧ B]`, find `A*` over the
//! free variables with `A* ∧ ∃W[B] ≡ ∃W[A ∧ B]`.
//!
//! The solver branches on free variables. In every subspace it tries to
//! show that the quantified clauses of `A` (the targets) are redundant:
//! cheaply (satisfied, subsumed, or blocked on a quantified variable), by
//! SAT when both sides are false, or by adding a free-variable clause
//! implied by `A ∧ B` that falsifies the subspace. Redundancy facts are
//! recorded as D-sequents and merged on the way back up; at the root
//! every target carries an unconditional one.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::cnf::{resolve, Assignment, Clause, Cnf, Lit, Resolvent, Var};
use crate::qe_oracle::{qe_bruteforce, MAX_ENUM_VARS};
use crate::sat::Solver;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PqeError {
    #[error("pqe-budget: node budget of {0} exhausted")]
    Budget(u64),
    #[error("join needs the same clause in both D-sequents")]
    JoinClauseMismatch,
    #[error("join variable {0} must be 0 in one subspace and 1 in the other")]
    JoinNotOpposite(Var),
    #[error("join subspaces disagree on {0}")]
    JoinDisagree(Var),
    #[error("clauses are not resolvable on {0} without a tautology")]
    NotResolvable(Var),
}

/// `∃W[A ∧ B]` with `A` to be taken out of the quantifier scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqeTask {
    pub quantified: Vec<Var>,
    pub a: Cnf,
    pub b: Cnf,
}

impl PqeTask {
    pub fn new(quantified: impl IntoIterator<Item = Var>, a: Cnf, b: Cnf) -> PqeTask {
        let mut quantified: Vec<Var> = quantified.into_iter().collect();
        quantified.sort_unstable();
        quantified.dedup();
        PqeTask { quantified, a, b }
    }

    /// Free variables: those of `A ∧ B` not quantified.
    pub fn free_vars(&self) -> Vec<Var> {
        let w: BTreeSet<Var> = self.quantified.iter().copied().collect();
        let mut all = self.a.vars();
        all.extend(self.b.vars());
        all.into_iter().filter(|v| !w.contains(v)).collect()
    }
}

/// Why a clause was found redundant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Redundancy {
    /// Satisfied by the subspace assignment.
    Satisfied,
    /// Another live clause is a subset of it in the subspace.
    Subsumed,
    /// Every resolvent on this quantified variable with a live clause is a
    /// tautology.
    Blocked(Var),
    /// Both sides of the equivalence are false in the subspace.
    BothFalse,
    /// Both sides are true in the subspace.
    BothTrue,
    /// Derived from D-sequents of two sibling subspaces.
    Joined,
}

/// Asserts that `clause` is redundant in `∃W[A* ∧ A ∧ B]` within
/// `subspace`. An empty subspace makes the claim unconditional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DSequent {
    pub subspace: Assignment,
    pub clause: Clause,
    pub reason: Redundancy,
}

/// Merges D-sequents for sibling subspaces that differ only in `y`.
pub fn join(d1: &DSequent, d2: &DSequent, y: Var) -> Result<DSequent, PqeError> {
    if d1.clause != d2.clause {
        return Err(PqeError::JoinClauseMismatch);
    }
    match (d1.subspace.get(y), d2.subspace.get(y)) {
        (Some(a), Some(b)) if a != b => {}
        _ => return Err(PqeError::JoinNotOpposite(y)),
    }
    let mut subspace = Assignment::new();
    for (v, b) in d1.subspace.iter().chain(d2.subspace.iter()) {
        if v == y {
            continue;
        }
        if let (Some(x), Some(z)) = (d1.subspace.get(v), d2.subspace.get(v)) {
            if x != z {
                return Err(PqeError::JoinDisagree(v));
            }
        }
        subspace.set(v, b);
    }
    Ok(DSequent {
        subspace,
        clause: d1.clause.clone(),
        reason: Redundancy::Joined,
    })
}

/// Resolves the clauses falsified in the `y = 0` and `y = 1` halves of a
/// subspace, giving a clause falsified by the subspace itself.
pub fn conflict_clause_dsequent(y: Var, falsified0: &Clause, falsified1: &Clause) -> Result<Clause, PqeError> {
    if !falsified0.contains(y.pos()) || !falsified1.contains(y.neg()) {
        return Err(PqeError::NotResolvable(y));
    }
    match resolve(falsified0, falsified1, y) {
        Ok(Resolvent::Clause(c)) => Ok(c),
        _ => Err(PqeError::NotResolvable(y)),
    }
}

/// Checks the three cheap redundancy conditions for `c` against the other
/// live clauses `pool` within `branch`.
pub fn trivially_redundant(c: &Clause, pool: &[Clause], branch: &Assignment, quantified: &[Var]) -> Option<Redundancy> {
    let Some(cq) = c.cofactor(branch) else {
        return Some(Redundancy::Satisfied);
    };
    let live: Vec<Clause> = pool
        .iter()
        .filter(|d| *d != c)
        .filter_map(|d| d.cofactor(branch))
        .collect();
    if live.iter().any(|d| d.subsumes(&cq)) {
        return Some(Redundancy::Subsumed);
    }
    for l in cq.lits() {
        let y = l.var();
        if quantified.binary_search(&y).is_err() {
            continue;
        }
        let blocked = live
            .iter()
            .filter(|d| d.contains(!*l))
            .all(|d| matches!(resolve(&cq, d, y), Ok(Resolvent::Tautology(_))));
        if blocked {
            return Some(Redundancy::Blocked(y));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct PqeOptions {
    /// Branch nodes before giving up.
    pub node_budget: u64,
    /// Keep every D-sequent derived, not only the root ones.
    pub log_dsequents: bool,
    /// Allow exhaustive elimination when the budget runs out.
    pub fallback: bool,
}

impl Default for PqeOptions {
    fn default() -> Self {
        PqeOptions {
            node_budget: 1_000_000,
            log_dsequents: false,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PqeOutcome {
    /// Clauses over the free variables, implied by `A ∧ B`.
    pub a_star: Cnf,
    /// One unconditional D-sequent per quantified clause of `A`.
    pub dsequents: Vec<DSequent>,
    /// Every D-sequent derived, when logging was requested.
    pub log: Vec<DSequent>,
    pub nodes: u64,
    /// The answer came from exhaustive elimination after the budget ran out.
    pub fallback: bool,
}

enum NodeResult {
    /// Every target is redundant in the subspace.
    Redundant(Vec<DSequent>),
    /// A clause of `A*` falsified by the subspace.
    Conflict(Clause, Vec<DSequent>),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Origin {
    Side,
    Derived,
    Target(usize),
}

struct Engine {
    quantified: Vec<Var>,
    free: Vec<Var>,
    solver: Solver,
    selectors: Vec<Var>,
    targets: Vec<Clause>,
    clauses: Vec<Clause>,
    origin: Vec<Origin>,
    occ: HashMap<Lit, Vec<usize>>,
    derived: Vec<Clause>,
    nodes: u64,
    budget: u64,
    log: Option<Vec<DSequent>>,
}

impl Engine {
    fn add_pool_clause(&mut self, c: Clause, origin: Origin) {
        let id = self.clauses.len();
        for &l in c.lits() {
            self.occ.entry(l).or_default().push(id);
        }
        self.clauses.push(c);
        self.origin.push(origin);
    }

    fn add_derived(&mut self, k: Clause) {
        self.solver.add_clause(k.lits());
        self.derived.push(k.clone());
        self.add_pool_clause(k, Origin::Derived);
    }

    fn is_quantified(&self, v: Var) -> bool {
        self.quantified.binary_search(&v).is_ok()
    }

    fn trivial(&self, t: usize, q: &Assignment, removed: &[bool]) -> Option<Redundancy> {
        let Some(cq) = self.targets[t].cofactor(q) else {
            return Some(Redundancy::Satisfied);
        };
        let live = |id: usize| match self.origin[id] {
            Origin::Target(u) => u != t && !removed[u],
            _ => true,
        };
        for l in cq.lits() {
            for &id in self.occ.get(l).into_iter().flatten() {
                if live(id) {
                    if let Some(dq) = self.clauses[id].cofactor(q) {
                        if dq.subsumes(&cq) {
                            return Some(Redundancy::Subsumed);
                        }
                    }
                }
            }
        }
        for l in cq.lits() {
            let y = l.var();
            if !self.is_quantified(y) {
                continue;
            }
            let blocked = self.occ.get(&!*l).into_iter().flatten().all(|&id| {
                !live(id)
                    || match self.clauses[id].cofactor(q) {
                        None => true,
                        Some(dq) => matches!(resolve(&cq, &dq, y), Ok(Resolvent::Tautology(_))),
                    }
            });
            if blocked {
                return Some(Redundancy::Blocked(y));
            }
        }
        None
    }

    fn all_targets(&self, q: &Assignment, reason: Redundancy) -> Vec<DSequent> {
        self.targets
            .iter()
            .map(|c| DSequent {
                subspace: q.clone(),
                clause: c.clone(),
                reason,
            })
            .collect()
    }

    fn record(&mut self, ds: &[DSequent]) {
        if let Some(log) = &mut self.log {
            log.extend(ds.iter().cloned());
        }
    }

    fn lhs_assumptions(&self, q: &Assignment) -> Vec<Lit> {
        let mut a = q.lits();
        a.extend(self.selectors.iter().map(|e| e.pos()));
        a
    }

    /// A short clause over the free variables, falsified by `q` and implied
    /// by `A* ∧ A ∧ B`, from the final-conflict core of the last call.
    fn conflict_clause(&mut self, q: &Assignment) -> Clause {
        let mut core: Vec<Lit> = self
            .solver
            .core()
            .iter()
            .copied()
            .filter(|l| q.lit_value(*l) == Some(true))
            .collect();
        let mut i = 0;
        while i < core.len() && core.len() > 1 {
            let mut trial: Vec<Lit> = core.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &l)| l).collect();
            trial.extend(self.selectors.iter().map(|e| e.pos()));
            if !self.solver.solve(&trial) {
                let keep: BTreeSet<Lit> = self.solver.core().iter().copied().collect();
                core = core
                    .iter()
                    .enumerate()
                    .filter(|&(j, l)| j != i && keep.contains(l))
                    .map(|(_, &l)| l)
                    .collect();
            } else {
                i += 1;
            }
        }
        Clause::new(core.iter().map(|&l| !l)).expect("core literals are consistent")
    }

    fn branch_var(&self, q: &Assignment) -> Option<Var> {
        self.free.iter().copied().find(|&v| {
            q.get(v).is_none()
                && [v.pos(), v.neg()].iter().any(|l| {
                    self.occ
                        .get(l)
                        .into_iter()
                        .flatten()
                        .any(|&id| self.clauses[id].cofactor(q).is_some())
                })
        })
    }

    fn node(&mut self, q: &mut Assignment) -> Result<NodeResult, PqeError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(PqeError::Budget(self.budget));
        }
        // Right-hand side false: nothing to preserve.
        let q_lits = q.lits();
        if !self.solver.solve(&q_lits) {
            let ds = self.all_targets(q, Redundancy::BothFalse);
            self.record(&ds);
            return Ok(NodeResult::Redundant(ds));
        }
        let mut removed = vec![false; self.targets.len()];
        let mut reasons = vec![None; self.targets.len()];
        for t in 0..self.targets.len() {
            if let Some(r) = self.trivial(t, q, &removed) {
                removed[t] = true;
                reasons[t] = Some(r);
            }
        }
        if removed.iter().all(|&r| r) {
            let ds: Vec<DSequent> = self
                .targets
                .iter()
                .zip(&reasons)
                .map(|(c, r)| DSequent {
                    subspace: q.clone(),
                    clause: c.clone(),
                    reason: r.unwrap(),
                })
                .collect();
            self.record(&ds);
            return Ok(NodeResult::Redundant(ds));
        }
        let lhs = self.lhs_assumptions(q);
        if !self.solver.solve(&lhs) {
            let k = self.conflict_clause(q);
            self.add_derived(k.clone());
            let ds = self.all_targets(q, Redundancy::BothFalse);
            self.record(&ds);
            return Ok(NodeResult::Conflict(k, ds));
        }
        let Some(y) = self.branch_var(q) else {
            let ds = self.all_targets(q, Redundancy::BothTrue);
            self.record(&ds);
            return Ok(NodeResult::Redundant(ds));
        };
        let mut halves = Vec::with_capacity(2);
        for value in [false, true] {
            q.set(y, value);
            let r = self.node(q);
            q.unset(y);
            let r = r?;
            if let NodeResult::Conflict(k, _) = &r {
                if !k.contains_var(y) {
                    // The clause is already falsified without `y`.
                    let ds = self.all_targets(q, Redundancy::BothFalse);
                    self.record(&ds);
                    return Ok(NodeResult::Conflict(k.clone(), ds));
                }
            }
            halves.push(r);
        }
        let r1 = halves.pop().unwrap();
        let r0 = halves.pop().unwrap();
        if let (NodeResult::Conflict(k0, d0), NodeResult::Conflict(k1, d1)) = (&r0, &r1) {
            let k = conflict_clause_dsequent(y, k0, k1)?;
            self.add_derived(k.clone());
            let ds = d0
                .iter()
                .zip(d1)
                .map(|(a, b)| join(a, b, y))
                .collect::<Result<Vec<_>, _>>()?;
            self.record(&ds);
            return Ok(NodeResult::Conflict(k, ds));
        }
        let (d0, d1) = match (r0, r1) {
            (NodeResult::Redundant(a) | NodeResult::Conflict(_, a), NodeResult::Redundant(b) | NodeResult::Conflict(_, b)) => (a, b),
        };
        let ds = d0
            .iter()
            .zip(&d1)
            .map(|(a, b)| join(a, b, y))
            .collect::<Result<Vec<_>, _>>()?;
        self.record(&ds);
        Ok(NodeResult::Redundant(ds))
    }
}

fn finish(mut a_star: Cnf) -> Cnf {
    if a_star.iter().any(|c| c.is_empty()) {
        return Cnf::from_clauses([Clause::empty()]);
    }
    a_star.remove_subsumed();
    a_star
}

/// Takes `A` out of the scope of `∃W` in `∃W[A ∧ B]`.
pub fn take_out(task: &PqeTask, opts: &PqeOptions) -> Result<PqeOutcome, PqeError> {
    let quantified = task.quantified.clone();
    let is_q = |v: Var| quantified.binary_search(&v).is_ok();
    let mut a_star = Cnf::new();
    let mut targets = Vec::new();
    for c in &task.a {
        if c.vars().any(is_q) {
            targets.push(c.clone());
        } else {
            a_star.push(c.clone());
        }
    }
    if targets.is_empty() {
        return Ok(PqeOutcome {
            a_star: finish(a_star),
            dsequents: Vec::new(),
            log: Vec::new(),
            nodes: 0,
            fallback: false,
        });
    }
    let mut solver = Solver::from_cnf(&task.b);
    solver.add_cnf(&a_star);
    let mut selectors = Vec::new();
    for c in &targets {
        let e = solver.fresh_var();
        let mut lits = c.lits().to_vec();
        lits.push(e.neg());
        solver.add_clause(&lits);
        selectors.push(e);
    }
    let mut eng = Engine {
        quantified: quantified.clone(),
        free: task.free_vars(),
        solver,
        selectors,
        targets: targets.clone(),
        clauses: Vec::new(),
        origin: Vec::new(),
        occ: HashMap::new(),
        derived: Vec::new(),
        nodes: 0,
        budget: opts.node_budget,
        log: opts.log_dsequents.then(Vec::new),
    };
    for c in &task.b {
        eng.add_pool_clause(c.clone(), Origin::Side);
    }
    for c in &a_star {
        eng.add_pool_clause(c.clone(), Origin::Side);
    }
    for (i, c) in targets.iter().enumerate() {
        eng.add_pool_clause(c.clone(), Origin::Target(i));
    }
    let mut q = Assignment::new();
    match eng.node(&mut q) {
        Ok(r) => {
            let ds = match r {
                NodeResult::Redundant(ds) | NodeResult::Conflict(_, ds) => ds,
            };
            debug_assert!(ds.iter().all(|d| d.subspace.is_empty()));
            for k in eng.derived {
                a_star.push(k);
            }
            Ok(PqeOutcome {
                a_star: finish(a_star),
                dsequents: ds,
                log: eng.log.unwrap_or_default(),
                nodes: eng.nodes,
                fallback: false,
            })
        }
        Err(PqeError::Budget(b)) => {
            let mut all = task.a.clone();
            all.extend(&task.b);
            if !opts.fallback || all.vars().len() > MAX_ENUM_VARS {
                return Err(PqeError::Budget(b));
            }
            let q = qe_bruteforce(&quantified, &all).map_err(|_| PqeError::Budget(b))?;
            Ok(PqeOutcome {
                a_star: finish(q),
                dsequents: targets
                    .iter()
                    .map(|c| DSequent {
                        subspace: Assignment::new(),
                        clause: c.clone(),
                        reason: Redundancy::Joined,
                    })
                    .collect(),
                log: Vec::new(),
                nodes: eng.nodes,
                fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}
