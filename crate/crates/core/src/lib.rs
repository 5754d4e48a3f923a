//! Numerics for skew products on the circle times the Heisenberg nilmanifold:
//! group arithmetic, Möbius sieving, continued-fraction resonance analysis,
//! cobounding solvers, orbit sums, theta-type observables, Möbius correlation
//! sums and covering estimates.

pub mod arith;
pub mod complexity;
pub mod compensated;
pub mod correlate;
pub mod error;
pub mod flows;
pub mod fourier;
pub mod heisenberg;
pub mod observables;

pub use error::{Error, Result};
