//! Safety property checking of sequential circuits by logic relaxation.
//!
//! The checker builds a chain of per-frame formulas that over-approximate
//! the states reachable in at most `j` steps. Each frame is derived by
//! partial quantifier elimination from a relaxed transition relation, then
//! strengthened until either a bad state is shown reachable (a replayable
//! counterexample) or two consecutive frames coincide (an inductive
//! invariant that a SAT solver can check independently).

pub mod cnf;
pub mod sat;
pub mod circuit;
pub mod qe_oracle;
pub mod pqe;
pub mod boundary;
pub mod fixtures;
pub mod pclor;
pub mod indclause;
pub mod witness;
pub mod dimacs;
