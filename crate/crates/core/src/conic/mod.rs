//! Real conic programs over nonnegative, second-order and exponential cones.
//!
//! Cone conventions:
//!
//! - second-order: `(t, x)` with `‖x‖₂ ≤ t`;
//! - exponential: `(a, b, c)` with `c ≥ b·e^{a/b}`, `b > 0`, plus its closure.

mod cones;
mod program;
mod realify;
mod solver;

pub use cones::{add_rate_expcone, add_time_allocation_soc, exp_cone_violation, soc_violation};
pub use program::{AffineExpr, ConeBlock, ConeKind, ConicProgram};
pub use realify::{realify_system, ComplexAffine, ComplexVar};
pub use solver::{solve, solve_with_fixings, ConicSolution, SolveStatus, SolverSettings};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("cone block {block} references variable {var} but only {num_vars} are declared")]
    UnknownVariable { block: usize, var: usize, num_vars: usize },
    #[error("cone block {block}: {kind} cone needs {expected} rows, got {got}")]
    BadBlockSize {
        block: usize,
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("fixing of variable {0} is out of range")]
    BadFixing(usize),
}
