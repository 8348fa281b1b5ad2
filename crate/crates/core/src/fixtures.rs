//! Small circuits bundled with the library, used by tests and examples.

use crate::circuit::{add_stuttering, build_miter, encode, load, parse_circuit, CircuitError, TransitionSystem};

pub const STUCK0: &str = include_str!("../fixtures/stuck0.scirc");
pub const TOGGLE: &str = include_str!("../fixtures/toggle.scirc");
pub const DFF: &str = include_str!("../fixtures/dff.scirc");
pub const DFF_INV: &str = include_str!("../fixtures/dff_inv.scirc");
pub const DFF_BAD: &str = include_str!("../fixtures/dff_bad.scirc");
pub const COUNTER2: &str = include_str!("../fixtures/counter2.scirc");
pub const MUTEX: &str = include_str!("../fixtures/mutex.scirc");
pub const SHIFT3: &str = include_str!("../fixtures/shift3.scirc");

/// Name and text of every single-circuit fixture.
pub const ALL: [(&str, &str); 5] = [
    ("stuck0", STUCK0),
    ("toggle", TOGGLE),
    ("counter2", COUNTER2),
    ("mutex", MUTEX),
    ("shift3", SHIFT3),
];

/// Loads a circuit and adds stuttering unless it is already there.
pub fn stuttered(text: &str) -> Result<TransitionSystem, CircuitError> {
    let (_, ts) = load(text)?;
    if ts.stuttered {
        Ok(ts)
    } else {
        add_stuttering(&ts)
    }
}

/// The stuttered miter of two circuits.
pub fn miter(n: &str, k: &str) -> Result<TransitionSystem, CircuitError> {
    let (m, prop) = build_miter(&parse_circuit(n)?, &parse_circuit(k)?)?;
    add_stuttering(&encode(&m, &prop)?)
}
