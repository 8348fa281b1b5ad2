#![allow(dead_code)]

use lorcheck::circuit::{add_stuttering, load};
use lorcheck::qe_oracle::{reach_sequence, to_bits};
use rand::Rng;

fn expr(rng: &mut impl Rng, names: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        let n = &names[rng.gen_range(0..names.len())];
        return if rng.gen_bool(0.3) { format!("NOT {n}") } else { n.clone() };
    }
    let a = expr(rng, names, depth - 1);
    let b = expr(rng, names, depth - 1);
    let op = ["AND", "OR", "XOR", "AND"][rng.gen_range(0..4)];
    format!("({a} {op} {b})")
}

/// Latch and input declarations of a random circuit, without a property.
pub fn random_body(rng: &mut impl Rng, latches: usize, inputs: usize) -> String {
    let ls: Vec<String> = (0..latches).map(|i| format!("l{i}")).collect();
    let xs: Vec<String> = (0..inputs).map(|i| format!("x{i}")).collect();
    let all: Vec<String> = ls.iter().chain(&xs).cloned().collect();
    let mut out = String::new();
    for x in &xs {
        out += &format!("input {x}\n");
    }
    for l in &ls {
        let init = ["0", "0", "0", "1", "*"][rng.gen_range(0..5)];
        out += &format!("latch {l} init {init} next {}\n", expr(rng, &all, 3));
    }
    out
}

fn prop_forbidding(cube: &[(usize, bool)]) -> String {
    let lits: Vec<String> = cube
        .iter()
        .map(|&(i, b)| if b { format!("l{i}") } else { format!("NOT l{i}") })
        .collect();
    let mut body = lits[0].clone();
    for l in &lits[1..] {
        body = format!("({body} AND {l})");
    }
    format!("prop NOT {body}\n")
}

/// A random circuit whose property either holds without being trivially
/// true, or first fails after at least two steps. Alternates between the
/// two kinds by `want_fail`.
pub fn random_system(rng: &mut impl Rng, latches: usize, want_fail: bool) -> String {
    loop {
        let inputs = rng.gen_range(1..=2);
        let body = random_body(rng, latches, inputs);
        let ts = add_stuttering(&load(&format!("{body}prop 1\n")).unwrap().1).unwrap();
        let seq = reach_sequence(&ts, 1 << latches).unwrap();
        let reach = seq.last().unwrap();
        let pick: Vec<u32> = if want_fail {
            seq.windows(2)
                .skip(1)
                .flat_map(|w| w[1].states.difference(&w[0].states).copied().collect::<Vec<_>>())
                .collect()
        } else {
            (0u32..1 << latches).filter(|m| !reach.states.contains(m)).collect()
        };
        if pick.is_empty() {
            continue;
        }
        let target = pick[rng.gen_range(0..pick.len())];
        let bits = to_bits(target, latches);
        let mut cube: Vec<(usize, bool)> = bits.iter().copied().enumerate().collect();
        // Widen the forbidden region while it stays away from the states
        // it must avoid.
        let avoid = if want_fail { &seq[1] } else { reach };
        let mut order: Vec<usize> = (0..latches).collect();
        for i in 0..latches {
            let k = rng.gen_range(i..latches);
            order.swap(i, k);
        }
        for i in order {
            if cube.len() == 1 {
                break;
            }
            let cand: Vec<(usize, bool)> = cube.iter().copied().filter(|&(v, _)| v != i).collect();
            let hits = avoid
                .states
                .iter()
                .any(|&m| cand.iter().all(|&(v, b)| to_bits(m, latches)[v] == b));
            if !hits && rng.gen_bool(0.7) {
                cube = cand;
            }
        }
        return format!("{body}{}", prop_forbidding(&cube));
    }
}

use lorcheck::cnf::{Clause, Cnf, Lit, Var};
use lorcheck::pqe::PqeTask;

fn random_clause(rng: &mut impl Rng, nvars: u32, max_len: usize) -> Clause {
    let len = rng.gen_range(1..=max_len);
    let mut m = std::collections::BTreeMap::new();
    for _ in 0..len {
        m.insert(rng.gen_range(1..=nvars), rng.gen::<bool>());
    }
    Clause::new(m.into_iter().map(|(v, b)| Lit::new(Var(v), b))).unwrap()
}

pub fn random_cnf(rng: &mut impl Rng, nvars: u32, clauses: usize) -> Cnf {
    Cnf::from_clauses((0..clauses).map(|_| random_clause(rng, nvars, 4)))
}

/// A task over variables `1..=nvars` with the highest ones quantified and
/// at most `max_clauses` clauses in total.
pub fn random_pqe_task(rng: &mut impl Rng, nvars: u32, max_clauses: usize) -> PqeTask {
    let nw = rng.gen_range(1..nvars);
    let w: Vec<Var> = (nvars - nw + 1..=nvars).map(Var).collect();
    let na = rng.gen_range(1..=max_clauses / 3);
    let nb = rng.gen_range(0..=max_clauses - na);
    let a = random_cnf(rng, nvars, na);
    let b = random_cnf(rng, nvars, nb);
    PqeTask::new(w, a, b)
}
