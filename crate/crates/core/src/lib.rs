//! VNF placement and routing.
//!
//! Builds the mixed-integer models of the VNF-PR problem (basic, latency-aware,
//! bit-rate compression and combined variants), solves them with a bundled
//! branch-and-bound, orchestrates the lexicographic TE/NFV pipeline, and checks
//! every solution against an encoding-free validator.

pub mod error;
pub mod heuristic;
pub mod instance;
pub mod milp;
pub mod report;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};
