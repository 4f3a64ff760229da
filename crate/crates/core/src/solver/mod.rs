//! Exact solution of [`MilpModel`](crate::milp::MilpModel)s at desk scale.
//!
//! A depth-first branch-and-bound over binaries, bounded by a dual simplex on
//! the linear relaxation, plus a feasibility checker for arbitrary assignments.

mod bnb;
mod check;
mod factor;
mod lp;

pub use bnb::{
    check_numerics, relative_gap, solve, Branching, SolveResult, SolveStatus, SolverConfig,
    WarmStart,
};
pub use check::{check_feasible, ensure_feasible, ModelViolation};
