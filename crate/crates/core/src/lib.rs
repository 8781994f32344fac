//! Determinism-profile laboratory.
//!
//! Each protocol module computes a selected output (a reconstruction, a
//! capacity verdict, a lattice configuration, a preferred basis, a horizon
//! trace) under a family of refinement policies and exactly invertible
//! recodings. The [`harness`] turns those outputs into the stability indices
//! SSI(n) and SC(n) and a decaying / plateau verdict.

pub mod error;
pub mod grid;

pub use error::{Error, Result};
pub mod tv;
pub mod barrier;
pub mod ising;
pub mod pointer;
pub mod horizon;
pub mod harness;
