//! Simulation of random fields on discretized compact metric spaces and
//! factorable-continuity decompositions Δ(ξ, δ) ≤ τ(ω)·g(δ): scaling-function
//! construction, Orlicz / Grand Lebesgue norm machinery, metric entropy and
//! majorizing-measure bounds, and heavy-tail / rectangle variants.

pub mod bounds;
pub mod error;
pub mod factorize;
pub mod fields;
pub mod metric;
pub mod modulus;
pub mod orlicz;

pub use error::{Error, Result};
