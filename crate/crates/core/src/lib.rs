//! Belief-propagation estimates of the log-partition function of random
//! k-SAT formulas, together with the machinery used to validate them:
//!
//! - [`formula`]: random k-SAT generation, energies, factor graphs, DIMACS I/O.
//! - [`bp`]: synchronous belief propagation at a fixed inverse temperature.
//! - [`interpolate`]: the inverse-temperature interpolation estimate `Φ(β, F)`.
//! - [`exact`]: brute-force enumeration over all `2^N` assignments.
//! - [`tree`]: the random tree ensemble, worst-case boundary intervals and
//!   the contraction/uniqueness thresholds.
//! - [`density`]: population dynamics for the distributional fixed point and
//!   the limiting free energy `φ(β)`.

pub mod bp;
pub mod density;
pub mod error;
pub mod exact;
pub mod formula;
pub mod interpolate;
pub mod numeric;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
pub use formula::{Assignment, Clause, FactorGraph, Formula, Literal};
