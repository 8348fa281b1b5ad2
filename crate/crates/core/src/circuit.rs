//! Sequential circuits: SCIRC parsing, CNF encoding of the transition
//! relation, stuttering, and equivalence miters.
//!
//! SCIRC is line oriented, `#` starts a comment:
//!
//! ```text
//! input x
//! latch s init 0 next (s AND x)
//! signal g = NOT s
//! output z = s
//! prop NOT s
//! stuttering native
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::cnf::{Assignment, Clause, Cnf, FrameShift, Lit, Role, Var, VarTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: undeclared signal `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: `{name}` is declared twice")]
    Duplicate { line: usize, name: String },
    #[error("combinational cycle through `{0}`")]
    Cycle(String),
    #[error("property depends on `{0}`, which is not a latch")]
    PropNotOverState(String),
    #[error("property conjunct depends on {0} latches; at most 20 are supported")]
    PropTooWide(usize),
    #[error("no property: declare `prop` or a single output")]
    NoProperty,
    #[error("miter operands differ in {what}: {n} vs {k}")]
    ArityMismatch { what: &'static str, n: usize, k: usize },
    #[error("transition system is already stuttered")]
    AlreadyStuttered,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(bool),
    Sig(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn sig(name: &str) -> Expr {
        Expr::Sig(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn xor(a: Expr, b: Expr) -> Expr {
        Expr::Xor(Box::new(a), Box::new(b))
    }

    /// Names referenced by the expression.
    pub fn names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sig(n) => out.push(n.clone()),
            Expr::Not(a) => a.names(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Expr {
        match self {
            Expr::Const(b) => Expr::Const(*b),
            Expr::Sig(n) => Expr::Sig(f(n)),
            Expr::Not(a) => Expr::not(a.rename(f)),
            Expr::And(a, b) => Expr::and(a.rename(f), b.rename(f)),
            Expr::Or(a, b) => Expr::or(a.rename(f), b.rename(f)),
            Expr::Xor(a, b) => Expr::xor(a.rename(f), b.rename(f)),
        }
    }

    pub fn eval(&self, env: &impl Fn(&str) -> bool) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Sig(n) => env(n),
            Expr::Not(a) => !a.eval(env),
            Expr::And(a, b) => a.eval(env) && b.eval(env),
            Expr::Or(a, b) => a.eval(env) || b.eval(env),
            Expr::Xor(a, b) => a.eval(env) ^ b.eval(env),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(b) => write!(f, "{}", u8::from(*b)),
            Expr::Sig(n) => write!(f, "{n}"),
            Expr::Not(a) => write!(f, "NOT {a}"),
            Expr::And(a, b) => write!(f, "({a} AND {b})"),
            Expr::Or(a, b) => write!(f, "({a} OR {b})"),
            Expr::Xor(a, b) => write!(f, "({a} XOR {b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    One,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Latch {
    pub name: String,
    pub init: Init,
    pub next: Expr,
}

/// An equality between two inputs that the transition relation enforces.
/// The tag names the clauses so that a relaxation guess can drop them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputEquality {
    pub a: String,
    pub b: String,
    pub tag: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Circuit {
    pub inputs: Vec<String>,
    pub latches: Vec<Latch>,
    pub signals: Vec<(String, Expr)>,
    pub outputs: Vec<(String, Expr)>,
    pub prop: Option<Expr>,
    pub stuttering_native: bool,
    pub input_equalities: Vec<InputEquality>,
    /// Latch pairs whose initial values must agree (used for free inits).
    pub init_equalities: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Input,
    Latch,
    Signal(usize),
    Output(usize),
}

impl Circuit {
    fn kinds(&self) -> HashMap<&str, Kind> {
        let mut m = HashMap::new();
        for x in &self.inputs {
            m.insert(x.as_str(), Kind::Input);
        }
        for l in &self.latches {
            m.insert(l.name.as_str(), Kind::Latch);
        }
        for (i, (n, _)) in self.signals.iter().enumerate() {
            m.insert(n.as_str(), Kind::Signal(i));
        }
        for (i, (n, _)) in self.outputs.iter().enumerate() {
            m.insert(n.as_str(), Kind::Output(i));
        }
        m
    }

    fn latch_index(&self, name: &str) -> Option<usize> {
        self.latches.iter().position(|l| l.name == name)
    }

    fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|x| x == name)
    }

    /// Rejects combinational cycles among signals and outputs.
    pub fn check_acyclic(&self) -> Result<(), CircuitError> {
        let kinds = self.kinds();
        let defs: Vec<(&String, &Expr)> = self
            .signals
            .iter()
            .chain(self.outputs.iter())
            .map(|(n, e)| (n, e))
            .collect();
        let index = |k: Kind| match k {
            Kind::Signal(i) => Some(i),
            Kind::Output(i) => Some(self.signals.len() + i),
            _ => None,
        };
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; defs.len()];
        for root in 0..defs.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
            let succ = |i: usize| -> Vec<usize> {
                let mut ns = Vec::new();
                defs[i].1.names(&mut ns);
                ns.iter()
                    .filter_map(|n| kinds.get(n.as_str()).copied().and_then(index))
                    .collect()
            };
            state[root] = 1;
            stack.push((root, succ(root)));
            while let Some((node, rest)) = stack.last_mut() {
                match rest.pop() {
                    Some(n) => match state[n] {
                        0 => {
                            state[n] = 1;
                            let s = succ(n);
                            stack.push((n, s));
                        }
                        1 => return Err(CircuitError::Cycle(defs[n].0.clone())),
                        _ => {}
                    },
                    None => {
                        state[*node] = 2;
                        stack.pop();
                    }
                }
            }
        }
        Ok(())
    }

    /// One step of gate-level simulation: returns (next state, outputs).
    pub fn simulate(&self, state: &[bool], inputs: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let kinds = self.kinds();
        let mut memo: HashMap<String, bool> = HashMap::new();
        fn value(
            c: &Circuit,
            kinds: &HashMap<&str, Kind>,
            memo: &mut HashMap<String, bool>,
            state: &[bool],
            inputs: &[bool],
            name: &str,
        ) -> bool {
            if let Some(&b) = memo.get(name) {
                return b;
            }
            let e = match kinds[name] {
                Kind::Input => return inputs[c.input_index(name).unwrap()],
                Kind::Latch => return state[c.latch_index(name).unwrap()],
                Kind::Signal(i) => &c.signals[i].1,
                Kind::Output(i) => &c.outputs[i].1,
            };
            let mut names = Vec::new();
            e.names(&mut names);
            let vals: HashMap<String, bool> = names
                .into_iter()
                .map(|n| {
                    let b = value(c, kinds, memo, state, inputs, &n);
                    (n, b)
                })
                .collect();
            let b = e.eval(&|n| vals[n]);
            memo.insert(name.to_string(), b);
            b
        }
        let mut eval = |e: &Expr| {
            let mut names = Vec::new();
            e.names(&mut names);
            let vals: HashMap<String, bool> = names
                .into_iter()
                .map(|n| {
                    let b = value(self, &kinds, &mut memo, state, inputs, &n);
                    (n, b)
                })
                .collect();
            e.eval(&|n| vals[n])
        };
        let next = self.latches.iter().map(|l| eval(&l.next)).collect();
        let outs = self.outputs.iter().map(|(_, e)| eval(e)).collect();
        (next, outs)
    }

    /// Evaluates an expression over latches, signals and outputs in a state.
    /// Inputs read as false.
    pub fn eval_in_state(&self, e: &Expr, state: &[bool]) -> bool {
        let mut c = self.clone();
        c.outputs = vec![("__probe".to_string(), e.clone())];
        c.simulate(state, &vec![false; self.inputs.len()]).1[0]
    }
}

struct Lexer<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    LParen,
    RParen,
}

impl<'a> Lexer<'a> {
    fn err(&self, col: usize, msg: impl Into<String>) -> CircuitError {
        CircuitError::Syntax {
            line: self.line,
            col: col + 1,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn peek(&mut self) -> Option<(usize, Tok)> {
        let save = self.pos;
        let t = self.next();
        self.pos = save;
        t.ok().flatten()
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, CircuitError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        if start >= bytes.len() {
            return Ok(None);
        }
        match bytes[start] {
            b'(' => {
                self.pos += 1;
                Ok(Some((start, Tok::LParen)))
            }
            b')' => {
                self.pos += 1;
                Ok(Some((start, Tok::RParen)))
            }
            c if is_name_char(c) || c == b'*' => {
                while self.pos < bytes.len() && (is_name_char(bytes[self.pos]) || bytes[self.pos] == b'*') {
                    self.pos += 1;
                }
                Ok(Some((start, Tok::Name(self.text[start..self.pos].to_string()))))
            }
            _ => {
                let ch = self.text[start..].chars().next().unwrap();
                Err(self.err(start, format!("unexpected character `{ch}`")))
            }
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<(usize, String), CircuitError> {
        match self.next()? {
            Some((col, Tok::Name(n))) => Ok((col, n)),
            Some((col, _)) => Err(self.err(col, format!("expected {what}"))),
            None => Err(self.err(self.text.len(), format!("expected {what}"))),
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), CircuitError> {
        let (col, n) = self.expect_name(&format!("`{word}`"))?;
        if n != word {
            return Err(self.err(col, format!("expected `{word}`, found `{n}`")));
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<String, CircuitError> {
        let (col, n) = self.expect_name("a signal name")?;
        if !valid_ident(&n) {
            return Err(self.err(col, format!("`{n}` is not a valid signal name")));
        }
        Ok(n)
    }

    fn term(&mut self) -> Result<Expr, CircuitError> {
        match self.next()? {
            None => Err(self.err(self.text.len(), "expected an expression")),
            Some((col, Tok::RParen)) => Err(self.err(col, "unexpected `)`")),
            Some((_, Tok::LParen)) => {
                let mut acc = self.term()?;
                let mut op: Option<String> = None;
                loop {
                    match self.next()? {
                        Some((_, Tok::RParen)) => break,
                        Some((col, Tok::Name(w))) if matches!(w.as_str(), "AND" | "OR" | "XOR") => {
                            if op.as_deref().is_some_and(|o| o != w) {
                                return Err(self.err(col, "mixed operators need parentheses"));
                            }
                            let rhs = self.term()?;
                            acc = match w.as_str() {
                                "AND" => Expr::and(acc, rhs),
                                "OR" => Expr::or(acc, rhs),
                                _ => Expr::xor(acc, rhs),
                            };
                            op = Some(w);
                        }
                        Some((col, _)) => return Err(self.err(col, "expected AND, OR, XOR or `)`")),
                        None => return Err(self.err(self.text.len(), "missing `)`")),
                    }
                }
                Ok(acc)
            }
            Some((col, Tok::Name(w))) => match w.as_str() {
                "0" => Ok(Expr::Const(false)),
                "1" => Ok(Expr::Const(true)),
                "NOT" => Ok(Expr::not(self.term()?)),
                "AND" | "OR" | "XOR" => Err(self.err(col, format!("unexpected `{w}`"))),
                _ if valid_ident(&w) => Ok(Expr::Sig(w)),
                _ => Err(self.err(col, format!("`{w}` is not a valid signal name"))),
            },
        }
    }

    fn expr_to_end(&mut self) -> Result<Expr, CircuitError> {
        let e = self.term()?;
        if let Some((col, _)) = self.peek() {
            return Err(self.err(col, "trailing input after expression"));
        }
        Ok(e)
    }
}

fn is_name_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'[' | b']' | b'$')
}

fn valid_ident(n: &str) -> bool {
    let first = n.as_bytes()[0];
    (first.is_ascii_alphabetic() || first == b'_')
        && !matches!(n, "AND" | "OR" | "XOR" | "NOT")
        && n.bytes().all(is_name_char)
}

/// Parses SCIRC text into a validated circuit.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut c = Circuit::default();
    let mut declared: HashMap<String, usize> = HashMap::new();
    let mut uses: Vec<(usize, Expr)> = Vec::new();
    let mut declare = |name: &str, line: usize| -> Result<(), CircuitError> {
        if declared.insert(name.to_string(), line).is_some() {
            return Err(CircuitError::Duplicate {
                line,
                name: name.to_string(),
            });
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut lx = Lexer { line, text: body, pos: 0 };
        if lx.at_end() {
            continue;
        }
        let (col, kw) = lx.expect_name("a declaration keyword")?;
        match kw.as_str() {
            "input" => {
                let n = lx.ident()?;
                declare(&n, line)?;
                c.inputs.push(n);
            }
            "latch" => {
                let n = lx.ident()?;
                lx.expect_word("init")?;
                let (icol, iv) = lx.expect_name("an initial value")?;
                let init = match iv.as_str() {
                    "0" => Init::Zero,
                    "1" => Init::One,
                    "*" => Init::Free,
                    _ => return Err(lx.err(icol, "initial value must be 0, 1 or *")),
                };
                lx.expect_word("next")?;
                let next = lx.expr_to_end()?;
                declare(&n, line)?;
                uses.push((line, next.clone()));
                c.latches.push(Latch { name: n, init, next });
            }
            "signal" | "output" => {
                let n = lx.ident()?;
                lx.skip_ws();
                if lx.text.as_bytes().get(lx.pos) != Some(&b'=') {
                    return Err(lx.err(lx.pos, "expected `=`"));
                }
                lx.pos += 1;
                let e = lx.expr_to_end()?;
                declare(&n, line)?;
                uses.push((line, e.clone()));
                if kw == "signal" {
                    c.signals.push((n, e));
                } else {
                    c.outputs.push((n, e));
                }
            }
            "prop" => {
                if c.prop.is_some() {
                    return Err(lx.err(col, "property declared twice"));
                }
                let e = lx.expr_to_end()?;
                uses.push((line, e.clone()));
                c.prop = Some(e);
            }
            "stuttering" => {
                lx.expect_word("native")?;
                if !lx.at_end() {
                    return Err(lx.err(lx.pos, "trailing input"));
                }
                c.stuttering_native = true;
            }
            _ => return Err(lx.err(col, format!("unknown declaration `{kw}`"))),
        }
        if !lx.at_end() {
            return Err(lx.err(lx.pos, "trailing input"));
        }
    }
    for (line, e) in &uses {
        let mut ns = Vec::new();
        e.names(&mut ns);
        for n in ns {
            if !declared.contains_key(&n) {
                return Err(CircuitError::Undeclared { line: *line, name: n });
            }
        }
    }
    c.check_acyclic()?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Sym {
    S(u32),
    X(u32),
    Y(u32),
    Next(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum SLit {
    Const(bool),
    Lit(Sym, bool),
}

impl SLit {
    fn neg(self) -> SLit {
        match self {
            SLit::Const(b) => SLit::Const(!b),
            SLit::Lit(s, p) => SLit::Lit(s, !p),
        }
    }
}

#[derive(Clone, Copy)]
enum Op {
    And,
    Or,
    Xor,
}

struct Encoder<'c> {
    c: &'c Circuit,
    kinds: HashMap<&'c str, Kind>,
    memo: HashMap<String, SLit>,
    gate_names: Vec<String>,
    clauses: Vec<(Vec<(Sym, bool)>, Option<String>)>,
}

impl<'c> Encoder<'c> {
    fn clause(&mut self, lits: &[SLit], tag: Option<&str>) {
        let mut out: Vec<(Sym, bool)> = Vec::new();
        for &l in lits {
            match l {
                SLit::Const(true) => return,
                SLit::Const(false) => {}
                SLit::Lit(s, p) => {
                    if out.contains(&(s, !p)) {
                        return;
                    }
                    if !out.contains(&(s, p)) {
                        out.push((s, p));
                    }
                }
            }
        }
        self.clauses.push((out, tag.map(str::to_string)));
    }

    fn equal(&mut self, a: SLit, b: SLit, tag: Option<&str>) {
        self.clause(&[a.neg(), b], tag);
        self.clause(&[a, b.neg()], tag);
    }

    fn simplify(op: Op, a: SLit, b: SLit) -> Option<SLit> {
        use SLit::Const;
        match op {
            Op::And => match (a, b) {
                (Const(false), _) | (_, Const(false)) => Some(Const(false)),
                (Const(true), x) | (x, Const(true)) => Some(x),
                _ if a == b => Some(a),
                _ if a == b.neg() => Some(Const(false)),
                _ => None,
            },
            Op::Or => match (a, b) {
                (Const(true), _) | (_, Const(true)) => Some(Const(true)),
                (Const(false), x) | (x, Const(false)) => Some(x),
                _ if a == b => Some(a),
                _ if a == b.neg() => Some(Const(true)),
                _ => None,
            },
            Op::Xor => match (a, b) {
                (Const(c), x) | (x, Const(c)) => Some(if c { x.neg() } else { x }),
                _ if a == b => Some(Const(false)),
                _ if a == b.neg() => Some(Const(true)),
                _ => None,
            },
        }
    }

    /// Encodes `o ≡ op(a, b)`, with `o` a fresh gate variable unless given.
    fn gate(&mut self, op: Op, a: SLit, b: SLit, out: Option<SLit>, name: Option<&str>) -> SLit {
        if let Some(r) = Self::simplify(op, a, b) {
            if let Some(o) = out {
                self.equal(o, r, None);
            }
            return r;
        }
        let o = out.unwrap_or_else(|| {
            let k = self.gate_names.len() as u32;
            self.gate_names
                .push(name.map_or_else(|| format!("_g{k}"), str::to_string));
            SLit::Lit(Sym::Y(k), true)
        });
        match op {
            Op::And => {
                self.clause(&[o.neg(), a], None);
                self.clause(&[o.neg(), b], None);
                self.clause(&[o, a.neg(), b.neg()], None);
            }
            Op::Or => {
                self.clause(&[o, a.neg()], None);
                self.clause(&[o, b.neg()], None);
                self.clause(&[o.neg(), a, b], None);
            }
            Op::Xor => {
                self.clause(&[o.neg(), a, b], None);
                self.clause(&[o.neg(), a.neg(), b.neg()], None);
                self.clause(&[o, a.neg(), b], None);
                self.clause(&[o, a, b.neg()], None);
            }
        }
        o
    }

    fn split(e: &Expr) -> (bool, Option<(Op, &Expr, &Expr)>, &Expr) {
        let mut pos = true;
        let mut cur = e;
        while let Expr::Not(a) = cur {
            pos = !pos;
            cur = a;
        }
        let g = match cur {
            Expr::And(a, b) => Some((Op::And, &**a, &**b)),
            Expr::Or(a, b) => Some((Op::Or, &**a, &**b)),
            Expr::Xor(a, b) => Some((Op::Xor, &**a, &**b)),
            _ => None,
        };
        (pos, g, cur)
    }

    fn expr(&mut self, e: &Expr, name: Option<&str>) -> SLit {
        let (pos, g, leaf) = Self::split(e);
        let r = match g {
            Some((op, a, b)) => {
                let (a, b) = (self.expr(a, None), self.expr(b, None));
                self.gate(op, a, b, None, name)
            }
            None => match leaf {
                Expr::Const(b) => SLit::Const(*b),
                Expr::Sig(n) => self.signal(n),
                _ => unreachable!(),
            },
        };
        if pos {
            r
        } else {
            r.neg()
        }
    }

    fn signal(&mut self, n: &str) -> SLit {
        if let Some(&l) = self.memo.get(n) {
            return l;
        }
        let c = self.c;
        let l = match self.kinds[n] {
            Kind::Input => SLit::Lit(Sym::X(c.input_index(n).unwrap() as u32), true),
            Kind::Latch => SLit::Lit(Sym::S(c.latch_index(n).unwrap() as u32), true),
            Kind::Signal(i) => self.expr(&c.signals[i].1, Some(n)),
            Kind::Output(i) => self.expr(&c.outputs[i].1, Some(n)),
        };
        self.memo.insert(n.to_string(), l);
        l
    }

    fn next_state(&mut self, i: usize) {
        let e = &self.c.latches[i].next;
        let (pos, g, leaf) = Self::split(e);
        let out = SLit::Lit(Sym::Next(i as u32), pos);
        match g {
            Some((op, a, b)) => {
                let (a, b) = (self.expr(a, None), self.expr(b, None));
                self.gate(op, a, b, Some(out), None);
            }
            None => {
                let r = self.expr(leaf, None);
                self.equal(out, r, None);
            }
        }
    }
}

/// A transition system over a [`VarTable`]. `init` and `prop` mention frame-0
/// state variables; `trans` mentions frame-0 state, input and internal
/// variables and frame-1 state variables (the next state).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    pub vars: VarTable,
    pub init: Cnf,
    pub trans: Cnf,
    /// One entry per clause of `trans`.
    pub trans_tags: Vec<Option<String>>,
    pub prop: Cnf,
    /// The input selecting between the original step and a copy step.
    pub stuttering_var: Option<Var>,
    /// True if stuttering was added or the circuit declared it natively.
    pub stuttered: bool,
}

impl TransitionSystem {
    pub fn num_state(&self) -> usize {
        self.vars.num(Role::State)
    }

    pub fn state_vars(&self, frame: u32) -> Vec<Var> {
        self.vars.vars(Role::State, frame)
    }

    pub fn input_vars(&self, frame: u32) -> Vec<Var> {
        self.vars.vars(Role::Input, frame)
    }

    pub fn internal_vars(&self, frame: u32) -> Vec<Var> {
        self.vars.vars(Role::Internal, frame)
    }

    /// `S_f ∪ X_f ∪ Y_f`.
    pub fn frame_vars(&self, frame: u32) -> Vec<Var> {
        self.vars.frame_vars(frame)
    }

    /// Moves a template formula (frames 0 and 1) forward by `j` frames.
    pub fn shift(&self, f: &Cnf, j: u32) -> Cnf {
        f.rename_frame(&self.vars, &FrameShift::Offset(i64::from(j)))
            .expect("template formula uses table variables")
    }

    pub fn shift_clause(&self, c: &Clause, j: u32) -> Clause {
        let stride = self.vars.stride();
        c.map_vars(|v| Var(v.0 + j * stride))
    }

    /// Moves a formula over frame-`from` variables back to the template.
    pub fn unshift(&self, f: &Cnf, from: u32) -> Cnf {
        f.rename_frame(&self.vars, &FrameShift::Offset(-i64::from(from)))
            .expect("formula lives at or after the given frame")
    }

    /// The transition relation from frame `j` to frame `j + 1`.
    pub fn frame(&self, j: u32) -> Cnf {
        self.shift(&self.trans, j)
    }

    /// State bits of `frame` read from an assignment (missing reads false).
    pub fn state_of(&self, a: &Assignment, frame: u32) -> Vec<bool> {
        self.state_vars(frame)
            .into_iter()
            .map(|v| a.get(v).unwrap_or(false))
            .collect()
    }

    pub fn inputs_of(&self, a: &Assignment, frame: u32) -> Vec<bool> {
        self.input_vars(frame)
            .into_iter()
            .map(|v| a.get(v).unwrap_or(false))
            .collect()
    }

    pub fn state_cube(&self, bits: &[bool], frame: u32) -> Vec<Lit> {
        self.state_vars(frame)
            .into_iter()
            .zip(bits)
            .map(|(v, &b)| Lit::new(v, b))
            .collect()
    }

    pub fn state_assignment(&self, bits: &[bool], frame: u32) -> Assignment {
        Assignment::from_lits(self.state_cube(bits, frame))
    }

    /// Indices of transition clauses carrying `tag`.
    pub fn tagged(&self, tag: &str) -> Vec<usize> {
        (0..self.trans.len())
            .filter(|&i| self.trans_tags[i].as_deref() == Some(tag))
            .collect()
    }
}

/// The declared property, or "the single output stays 0".
pub fn declared_property(c: &Circuit) -> Result<Expr, CircuitError> {
    if let Some(p) = &c.prop {
        return Ok(p.clone());
    }
    match c.outputs.as_slice() {
        [(z, _)] => Ok(Expr::not(Expr::sig(z))),
        _ => Err(CircuitError::NoProperty),
    }
}

/// Encodes the circuit and a property over its latches.
pub fn encode(c: &Circuit, prop: &Expr) -> Result<TransitionSystem, CircuitError> {
    c.check_acyclic()?;
    let mut enc = Encoder {
        c,
        kinds: c.kinds(),
        memo: HashMap::new(),
        gate_names: Vec::new(),
        clauses: Vec::new(),
    };
    for i in 0..c.latches.len() {
        enc.next_state(i);
    }
    for eq in &c.input_equalities {
        let (a, b) = (enc.signal(&eq.a), enc.signal(&eq.b));
        enc.equal(a, b, Some(&eq.tag));
    }
    let vars = VarTable::new(
        c.latches.iter().map(|l| l.name.clone()).collect(),
        c.inputs.clone(),
        enc.gate_names.clone(),
    );
    let mat = |s: Sym| match s {
        Sym::S(i) => vars.var(Role::State, i, 0),
        Sym::X(i) => vars.var(Role::Input, i, 0),
        Sym::Y(i) => vars.var(Role::Internal, i, 0),
        Sym::Next(i) => vars.var(Role::State, i, 1),
    };
    let mut trans = Cnf::new();
    let mut trans_tags = Vec::new();
    for (lits, tag) in &enc.clauses {
        let c = Clause::new(lits.iter().map(|&(s, p)| Lit::new(mat(s), p))).expect("encoder drops tautologies");
        trans.push(c);
        trans_tags.push(tag.clone());
    }

    let mut init = Cnf::new();
    for (i, l) in c.latches.iter().enumerate() {
        let v = vars.var(Role::State, i as u32, 0);
        match l.init {
            Init::Zero => init.push(Clause::new([v.neg()]).unwrap()),
            Init::One => init.push(Clause::new([v.pos()]).unwrap()),
            Init::Free => {}
        }
    }
    for (a, b) in &c.init_equalities {
        let va = vars.var(Role::State, c.latch_index(a).expect("latch") as u32, 0);
        let vb = vars.var(Role::State, c.latch_index(b).expect("latch") as u32, 0);
        init.push(Clause::new([va.neg(), vb.pos()]).unwrap());
        init.push(Clause::new([va.pos(), vb.neg()]).unwrap());
    }

    let prop = encode_prop(c, prop, &vars)?;
    Ok(TransitionSystem {
        vars,
        init,
        trans,
        trans_tags,
        prop,
        stuttering_var: None,
        stuttered: c.stuttering_native,
    })
}

/// Parses, picks the declared property, and encodes.
pub fn load(text: &str) -> Result<(Circuit, TransitionSystem), CircuitError> {
    let c = parse_circuit(text)?;
    let p = declared_property(&c)?;
    let ts = encode(&c, &p)?;
    Ok((c, ts))
}

/// Substitutes signal and output definitions until only latches remain.
fn inline_over_latches(c: &Circuit, e: &Expr, kinds: &HashMap<&str, Kind>) -> Result<Expr, CircuitError> {
    Ok(match e {
        Expr::Const(b) => Expr::Const(*b),
        Expr::Sig(n) => match kinds.get(n.as_str()) {
            Some(Kind::Latch) => Expr::Sig(n.clone()),
            Some(Kind::Signal(i)) => inline_over_latches(c, &c.signals[*i].1, kinds)?,
            Some(Kind::Output(i)) => inline_over_latches(c, &c.outputs[*i].1, kinds)?,
            _ => return Err(CircuitError::PropNotOverState(n.clone())),
        },
        Expr::Not(a) => Expr::not(inline_over_latches(c, a, kinds)?),
        Expr::And(a, b) => Expr::and(inline_over_latches(c, a, kinds)?, inline_over_latches(c, b, kinds)?),
        Expr::Or(a, b) => Expr::or(inline_over_latches(c, a, kinds)?, inline_over_latches(c, b, kinds)?),
        Expr::Xor(a, b) => Expr::xor(inline_over_latches(c, a, kinds)?, inline_over_latches(c, b, kinds)?),
    })
}

fn conjuncts(e: &Expr, positive: bool, out: &mut Vec<Expr>) {
    match (e, positive) {
        (Expr::Const(b), _) if *b == positive => {}
        (Expr::Not(a), _) => conjuncts(a, !positive, out),
        (Expr::And(a, b), true) | (Expr::Or(a, b), false) => {
            conjuncts(a, positive, out);
            conjuncts(b, positive, out);
        }
        _ => out.push(if positive { e.clone() } else { Expr::not(e.clone()) }),
    }
}

/// CNF of a property, built per top-level conjunct from its truth table and
/// shortened by dropping literals that are not needed.
fn encode_prop(c: &Circuit, e: &Expr, vars: &VarTable) -> Result<Cnf, CircuitError> {
    let kinds = c.kinds();
    let e = inline_over_latches(c, e, &kinds)?;
    let mut parts = Vec::new();
    conjuncts(&e, true, &mut parts);
    let mut out = Cnf::new();
    for part in parts {
        let mut names = Vec::new();
        part.names(&mut names);
        let support: Vec<usize> = names
            .iter()
            .map(|n| c.latch_index(n).unwrap())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = support.len();
        if n > 20 {
            return Err(CircuitError::PropTooWide(n));
        }
        let slot: HashMap<&str, usize> = support
            .iter()
            .enumerate()
            .map(|(k, &i)| (c.latches[i].name.as_str(), k))
            .collect();
        let holds: Vec<bool> = (0u32..1 << n)
            .map(|bits| part.eval(&|name: &str| bits >> slot[name] & 1 == 1))
            .collect();
        // A clause over support positions given as (position, polarity).
        let valid = |cl: &[(usize, bool)]| {
            (0u32..1 << n).all(|bits| {
                let falsified = cl.iter().all(|&(k, p)| (bits >> k & 1 == 1) != p);
                !falsified || !holds[bits as usize]
            })
        };
        let mut clauses: BTreeSet<Vec<(usize, bool)>> = BTreeSet::new();
        for bits in 0u32..1 << n {
            if holds[bits as usize] {
                continue;
            }
            let mut cl: Vec<(usize, bool)> = (0..n).map(|k| (k, bits >> k & 1 == 0)).collect();
            let mut k = 0;
            while k < cl.len() {
                let mut shorter = cl.clone();
                shorter.remove(k);
                if valid(&shorter) {
                    cl = shorter;
                } else {
                    k += 1;
                }
            }
            clauses.insert(cl);
        }
        for cl in clauses {
            out.push(
                Clause::new(cl.iter().map(|&(k, p)| Lit::new(vars.var(Role::State, support[k] as u32, 0), p)))
                    .unwrap(),
            );
        }
    }
    out.remove_subsumed();
    Ok(out)
}

pub const STUTTER_TAG: &str = "stutter";
pub const INTERFACE_TAG: &str = "interface";

/// Adds an input `v`: with `v = 1` the system steps as before, with `v = 0`
/// every latch keeps its value.
pub fn add_stuttering(ts: &TransitionSystem) -> Result<TransitionSystem, CircuitError> {
    if ts.stuttered {
        return Err(CircuitError::AlreadyStuttered);
    }
    let old = &ts.vars;
    let (ns, nx, ny) = (
        old.num(Role::State) as u32,
        old.num(Role::Input) as u32,
        old.num(Role::Internal) as u32,
    );
    let mut inputs = old.names(Role::Input).to_vec();
    inputs.push("_stutter".to_string());
    let mut internals = old.names(Role::Internal).to_vec();
    internals.extend(old.names(Role::State).iter().map(|n| format!("_next.{n}")));
    let vars = VarTable::new(old.names(Role::State).to_vec(), inputs, internals);
    let remap = |v: Var| {
        let i = old.info(v).expect("table variable");
        match (i.role, i.frame) {
            (Role::State, 0) => vars.var(Role::State, i.slot, 0),
            (Role::State, _) => vars.var(Role::Internal, ny + i.slot, 0),
            (r, _) => vars.var(r, i.slot, 0),
        }
    };
    let mut trans = ts.trans.map_vars(remap);
    let mut trans_tags = ts.trans_tags.clone();
    let v = vars.var(Role::Input, nx, 0);
    for i in 0..ns {
        let s = vars.var(Role::State, i, 0);
        let s1 = vars.var(Role::State, i, 1);
        let n = vars.var(Role::Internal, ny + i, 0);
        for c in [
            [v.neg(), n.neg(), s1.pos()],
            [v.neg(), n.pos(), s1.neg()],
            [v.pos(), s.neg(), s1.pos()],
            [v.pos(), s.pos(), s1.neg()],
        ] {
            trans.push(Clause::new(c).unwrap());
            trans_tags.push(Some(STUTTER_TAG.to_string()));
        }
    }
    Ok(TransitionSystem {
        init: ts.init.map_vars(remap),
        prop: ts.prop.map_vars(remap),
        vars,
        trans,
        trans_tags,
        stuttering_var: Some(v),
        stuttered: true,
    })
}

/// Builds the miter of two circuits: shared inputs (enforced by clauses
/// tagged [`INTERFACE_TAG`]), equal initial states, and the property that
/// corresponding outputs agree.
pub fn build_miter(n: &Circuit, k: &Circuit) -> Result<(Circuit, Expr), CircuitError> {
    if n.inputs.len() != k.inputs.len() {
        return Err(CircuitError::ArityMismatch {
            what: "inputs",
            n: n.inputs.len(),
            k: k.inputs.len(),
        });
    }
    if n.outputs.len() != k.outputs.len() {
        return Err(CircuitError::ArityMismatch {
            what: "outputs",
            n: n.outputs.len(),
            k: k.outputs.len(),
        });
    }
    let mut m = Circuit::default();
    let mut prefixed = |c: &Circuit, p: &str| {
        let f = |s: &str| format!("{p}.{s}");
        m.inputs.extend(c.inputs.iter().map(|x| f(x)));
        m.latches.extend(c.latches.iter().map(|l| Latch {
            name: f(&l.name),
            init: l.init,
            next: l.next.rename(&f),
        }));
        m.signals.extend(c.signals.iter().map(|(s, e)| (f(s), e.rename(&f))));
        m.outputs.extend(c.outputs.iter().map(|(s, e)| (f(s), e.rename(&f))));
    };
    prefixed(n, "n");
    prefixed(k, "k");
    for (a, b) in n.inputs.iter().zip(&k.inputs) {
        m.input_equalities.push(InputEquality {
            a: format!("n.{a}"),
            b: format!("k.{b}"),
            tag: INTERFACE_TAG.to_string(),
        });
    }
    if n.latches.len() == k.latches.len() {
        for (a, b) in n.latches.iter().zip(&k.latches) {
            if a.init == Init::Free && b.init == Init::Free {
                m.init_equalities.push((format!("n.{}", a.name), format!("k.{}", b.name)));
            }
        }
    }
    let mut diff: Option<Expr> = None;
    let mut prop: Option<Expr> = None;
    for ((a, _), (b, _)) in n.outputs.iter().zip(&k.outputs) {
        let d = Expr::xor(Expr::sig(&format!("n.{a}")), Expr::sig(&format!("k.{b}")));
        diff = Some(match diff {
            None => d.clone(),
            Some(x) => Expr::or(x, d.clone()),
        });
        prop = Some(match prop {
            None => Expr::not(d),
            Some(x) => Expr::and(x, Expr::not(d)),
        });
    }
    m.outputs
        .push(("miter.z".to_string(), diff.unwrap_or(Expr::Const(false))));
    let prop = prop.unwrap_or(Expr::Const(true));
    m.prop = Some(prop.clone());
    m.check_acyclic()?;
    Ok((m, prop))
}
