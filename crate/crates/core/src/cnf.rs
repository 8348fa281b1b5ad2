//! Clause-set formulas over integer-identified variables.
//!
//! Every algorithm in the crate trades in [`Cnf`] values. Variables of a
//! transition system carry a role (state, input, internal) and a time frame;
//! that metadata lives in a [`VarTable`] which lays frame copies out
//! arithmetically so that renaming a formula to another frame never needs
//! mutable state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Not;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("clause contains both polarities of variable {0}")]
    Tautology(Var),
    #[error("variable {0} does not occur in both clauses with opposite polarity")]
    NotResolvable(Var),
    #[error("assignment is partial: variable {0} unassigned")]
    PartialAssignment(Var),
    #[error("frame {0} has no image under the frame shift")]
    UnmappedFrame(u32),
    #[error("variable {0} is not described by the variable table")]
    UnknownVar(Var),
}

/// A propositional variable. Ids start at 1 so they print as DIMACS.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn id(self) -> u32 {
        self.0
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A literal, packed as `var << 1 | negated`. Ordering is by variable, then
/// positive before negative.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        Lit((var.0 << 1) | u32::from(!positive))
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Parses a non-zero DIMACS integer.
    pub fn from_dimacs(x: i64) -> Option<Lit> {
        if x == 0 || x.unsigned_abs() > u64::from(u32::MAX >> 2) {
            return None;
        }
        Some(Lit::new(Var(x.unsigned_abs() as u32), x > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var().0);
        if self.is_positive() {
            v
        } else {
            -v
        }
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A duplicate-free, sorted, non-tautological disjunction of literals.
/// The empty clause is false.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Result<Clause, CnfError> {
        let mut lits: Vec<Lit> = lits.into_iter().collect();
        lits.sort_unstable();
        lits.dedup();
        for w in lits.windows(2) {
            if w[0].var() == w[1].var() {
                return Err(CnfError::Tautology(w[0].var()));
            }
        }
        Ok(Clause { lits })
    }

    /// Builds a clause from DIMACS integers; panics on tautologies. Meant for
    /// fixtures and tests.
    pub fn from_dimacs(xs: &[i64]) -> Clause {
        Clause::new(xs.iter().map(|&x| Lit::from_dimacs(x).expect("non-zero literal")))
            .expect("non-tautological clause")
    }

    pub fn empty() -> Clause {
        Clause { lits: Vec::new() }
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn contains(&self, lit: Lit) -> bool {
        self.lits.binary_search(&lit).is_ok()
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.contains(var.pos()) || self.contains(var.neg())
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var())
    }

    /// Syntactic subsumption: every literal of `self` occurs in `other`.
    pub fn subsumes(&self, other: &Clause) -> bool {
        if self.lits.len() > other.lits.len() {
            return false;
        }
        let mut j = 0;
        for &l in &self.lits {
            while j < other.lits.len() && other.lits[j] < l {
                j += 1;
            }
            if j == other.lits.len() || other.lits[j] != l {
                return false;
            }
        }
        true
    }

    pub fn eval(&self, a: &Assignment) -> Truth {
        let mut unknown = false;
        for &l in &self.lits {
            match a.lit_value(l) {
                Some(true) => return Truth::True,
                Some(false) => {}
                None => unknown = true,
            }
        }
        if unknown {
            Truth::Unknown
        } else {
            Truth::False
        }
    }

    /// Drops the literals false under `a`; `None` if `a` satisfies the clause.
    pub fn cofactor(&self, a: &Assignment) -> Option<Clause> {
        let mut lits = Vec::with_capacity(self.lits.len());
        for &l in &self.lits {
            match a.lit_value(l) {
                Some(true) => return None,
                Some(false) => {}
                None => lits.push(l),
            }
        }
        Some(Clause { lits })
    }

    /// Applies a variable map; the map must be injective on this clause.
    pub fn map_vars(&self, mut f: impl FnMut(Var) -> Var) -> Clause {
        let mut lits: Vec<Lit> = self
            .lits
            .iter()
            .map(|l| Lit::new(f(l.var()), l.is_positive()))
            .collect();
        lits.sort_unstable();
        Clause { lits }
    }

    pub fn try_map_vars<E>(&self, mut f: impl FnMut(Var) -> Result<Var, E>) -> Result<Clause, E> {
        let mut lits = Vec::with_capacity(self.lits.len());
        for l in &self.lits {
            lits.push(Lit::new(f(l.var())?, l.is_positive()));
        }
        lits.sort_unstable();
        Ok(Clause { lits })
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l:?}")?;
        }
        write!(f, ")")
    }
}

/// Outcome of resolving two clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolvent {
    Clause(Clause),
    /// The resolvent contains a complementary pair; the raw literals are kept.
    Tautology(Vec<Lit>),
}

pub fn resolve(c1: &Clause, c2: &Clause, v: Var) -> Result<Resolvent, CnfError> {
    let (p, n) = if c1.contains(v.pos()) && c2.contains(v.neg()) {
        (c1, c2)
    } else if c1.contains(v.neg()) && c2.contains(v.pos()) {
        (c2, c1)
    } else {
        return Err(CnfError::NotResolvable(v));
    };
    let mut lits: Vec<Lit> = p
        .lits
        .iter()
        .chain(n.lits.iter())
        .copied()
        .filter(|l| l.var() != v)
        .collect();
    lits.sort_unstable();
    lits.dedup();
    match Clause::new(lits.iter().copied()) {
        Ok(c) => Ok(Resolvent::Clause(c)),
        Err(_) => Ok(Resolvent::Tautology(lits)),
    }
}

/// Three-valued evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

/// A possibly partial map from variables to Booleans.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    values: BTreeMap<Var, bool>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, bool)>) -> Assignment {
        Assignment {
            values: pairs.into_iter().collect(),
        }
    }

    pub fn from_lits(lits: impl IntoIterator<Item = Lit>) -> Assignment {
        Assignment::from_pairs(lits.into_iter().map(|l| (l.var(), l.is_positive())))
    }

    pub fn set(&mut self, v: Var, value: bool) {
        self.values.insert(v, value);
    }

    pub fn unset(&mut self, v: Var) -> Option<bool> {
        self.values.remove(&v)
    }

    pub fn get(&self, v: Var) -> Option<bool> {
        self.values.get(&v).copied()
    }

    pub fn lit_value(&self, l: Lit) -> Option<bool> {
        self.get(l.var()).map(|b| b == l.is_positive())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values.iter().map(|(&v, &b)| (v, b))
    }

    /// The literals made true by this assignment.
    pub fn lits(&self) -> Vec<Lit> {
        self.iter().map(|(v, b)| Lit::new(v, b)).collect()
    }

    pub fn is_complete_over(&self, vars: &[Var]) -> bool {
        vars.iter().all(|v| self.values.contains_key(v))
    }

    /// Union; values in `other` win on overlap.
    pub fn union(&self, other: &Assignment) -> Assignment {
        let mut values = self.values.clone();
        values.extend(other.values.iter().map(|(&v, &b)| (v, b)));
        Assignment { values }
    }

    pub fn restrict(&self, vars: &[Var]) -> Assignment {
        Assignment::from_pairs(vars.iter().filter_map(|&v| self.get(v).map(|b| (v, b))))
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.lits()).finish()
    }
}

/// The clause falsified exactly by `s` over `vars`.
pub fn longest_falsified_clause(s: &Assignment, vars: &[Var]) -> Result<Clause, CnfError> {
    let mut lits = Vec::with_capacity(vars.len());
    for &v in vars {
        let b = s.get(v).ok_or(CnfError::PartialAssignment(v))?;
        lits.push(Lit::new(v, !b));
    }
    Clause::new(lits)
}

/// A conjunction of clauses. The empty CNF is true.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Cnf {
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new() -> Cnf {
        Cnf::default()
    }

    pub fn from_clauses(clauses: impl IntoIterator<Item = Clause>) -> Cnf {
        Cnf {
            clauses: clauses.into_iter().collect(),
        }
    }

    pub fn from_dimacs(clauses: &[&[i64]]) -> Cnf {
        Cnf::from_clauses(clauses.iter().map(|c| Clause::from_dimacs(c)))
    }

    pub fn push(&mut self, c: Clause) {
        self.clauses.push(c);
    }

    pub fn extend(&mut self, other: &Cnf) {
        self.clauses.extend(other.clauses.iter().cloned());
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Clause> {
        self.clauses.iter()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn contains(&self, c: &Clause) -> bool {
        self.clauses.contains(c)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.clauses.iter().flat_map(|c| c.vars()).collect()
    }

    pub fn max_var(&self) -> Option<Var> {
        self.clauses.iter().flat_map(|c| c.vars()).max()
    }

    pub fn evaluate(&self, a: &Assignment) -> Truth {
        let mut unknown = false;
        for c in &self.clauses {
            match c.eval(a) {
                Truth::False => return Truth::False,
                Truth::Unknown => unknown = true,
                Truth::True => {}
            }
        }
        if unknown {
            Truth::Unknown
        } else {
            Truth::True
        }
    }

    pub fn cofactor(&self, a: &Assignment) -> Cnf {
        Cnf {
            clauses: self.clauses.iter().filter_map(|c| c.cofactor(a)).collect(),
        }
    }

    /// Sorts clauses and drops syntactic duplicates.
    pub fn normalize(&mut self) {
        self.clauses.sort();
        self.clauses.dedup();
    }

    pub fn normalized(mut self) -> Cnf {
        self.normalize();
        self
    }

    /// Normalizes and removes clauses subsumed by another clause.
    pub fn remove_subsumed(&mut self) {
        self.normalize();
        self.clauses.sort_by_key(|c| c.len());
        let mut kept: Vec<Clause> = Vec::with_capacity(self.clauses.len());
        for c in self.clauses.drain(..) {
            if !kept.iter().any(|k| k.subsumes(&c)) {
                kept.push(c);
            }
        }
        kept.sort();
        self.clauses = kept;
    }

    pub fn map_vars(&self, mut f: impl FnMut(Var) -> Var) -> Cnf {
        Cnf {
            clauses: self.clauses.iter().map(|c| c.map_vars(&mut f)).collect(),
        }
    }

    /// Moves every framed variable to its image frame; see [`FrameShift`].
    pub fn rename_frame(&self, table: &VarTable, shift: &FrameShift) -> Result<Cnf, CnfError> {
        let mut out = Vec::with_capacity(self.clauses.len());
        for c in &self.clauses {
            out.push(c.try_map_vars(|v| {
                let info = table.info(v).ok_or(CnfError::UnknownVar(v))?;
                let frame = shift.apply(info.frame)?;
                Ok(table.var(info.role, info.slot, frame))
            })?);
        }
        Ok(Cnf { clauses: out })
    }
}

impl fmt::Debug for Cnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.clauses).finish()
    }
}

impl FromIterator<Clause> for Cnf {
    fn from_iter<I: IntoIterator<Item = Clause>>(iter: I) -> Cnf {
        Cnf::from_clauses(iter)
    }
}

impl<'a> IntoIterator for &'a Cnf {
    type Item = &'a Clause;
    type IntoIter = std::slice::Iter<'a, Clause>;

    fn into_iter(self) -> Self::IntoIter {
        self.clauses.iter()
    }
}

/// How frame indices move under [`Cnf::rename_frame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameShift {
    Offset(i64),
    Map(BTreeMap<u32, u32>),
}

impl FrameShift {
    pub fn identity() -> FrameShift {
        FrameShift::Offset(0)
    }

    pub fn apply(&self, frame: u32) -> Result<u32, CnfError> {
        match self {
            FrameShift::Offset(d) => {
                let f = i64::from(frame) + d;
                u32::try_from(f).map_err(|_| CnfError::UnmappedFrame(frame))
            }
            FrameShift::Map(m) => m.get(&frame).copied().ok_or(CnfError::UnmappedFrame(frame)),
        }
    }

    pub fn inverse(&self) -> FrameShift {
        match self {
            FrameShift::Offset(d) => FrameShift::Offset(-d),
            FrameShift::Map(m) => FrameShift::Map(m.iter().map(|(&a, &b)| (b, a)).collect()),
        }
    }
}

/// Role of a transition-system variable. A next-state variable of frame
/// `k` is the [`Role::State`] variable of frame `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    State,
    Input,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarInfo {
    pub role: Role,
    pub slot: u32,
    pub frame: u32,
}

/// Names the per-frame signals of a transition system and lays out their
/// frame copies: `id = 1 + frame * stride + offset(role) + slot`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarTable {
    states: Vec<String>,
    inputs: Vec<String>,
    internals: Vec<String>,
}

impl VarTable {
    pub fn new(states: Vec<String>, inputs: Vec<String>, internals: Vec<String>) -> VarTable {
        VarTable {
            states,
            inputs,
            internals,
        }
    }

    pub fn num(&self, role: Role) -> usize {
        match role {
            Role::State => self.states.len(),
            Role::Input => self.inputs.len(),
            Role::Internal => self.internals.len(),
        }
    }

    pub fn names(&self, role: Role) -> &[String] {
        match role {
            Role::State => &self.states,
            Role::Input => &self.inputs,
            Role::Internal => &self.internals,
        }
    }

    pub fn stride(&self) -> u32 {
        (self.states.len() + self.inputs.len() + self.internals.len()) as u32
    }

    fn offset(&self, role: Role) -> u32 {
        match role {
            Role::State => 0,
            Role::Input => self.states.len() as u32,
            Role::Internal => (self.states.len() + self.inputs.len()) as u32,
        }
    }

    pub fn var(&self, role: Role, slot: u32, frame: u32) -> Var {
        debug_assert!((slot as usize) < self.num(role));
        Var(1 + frame * self.stride() + self.offset(role) + slot)
    }

    pub fn info(&self, v: Var) -> Option<VarInfo> {
        let stride = self.stride();
        if v.0 == 0 || stride == 0 {
            return None;
        }
        let k = v.0 - 1;
        let frame = k / stride;
        let off = k % stride;
        let (role, slot) = if off < self.offset(Role::Input) {
            (Role::State, off)
        } else if off < self.offset(Role::Internal) {
            (Role::Input, off - self.offset(Role::Input))
        } else {
            (Role::Internal, off - self.offset(Role::Internal))
        };
        Some(VarInfo { role, slot, frame })
    }

    pub fn vars(&self, role: Role, frame: u32) -> Vec<Var> {
        (0..self.num(role) as u32).map(|i| self.var(role, i, frame)).collect()
    }

    /// `S_f ∪ X_f ∪ Y_f`, the variables quantified away for frame `f`.
    pub fn frame_vars(&self, frame: u32) -> Vec<Var> {
        let base = 1 + frame * self.stride();
        (base..base + self.stride()).map(Var).collect()
    }

    pub fn name(&self, v: Var) -> String {
        match self.info(v) {
            Some(i) => format!("{}@{}", self.names(i.role)[i.slot as usize], i.frame),
            None => format!("{v}"),
        }
    }
}
