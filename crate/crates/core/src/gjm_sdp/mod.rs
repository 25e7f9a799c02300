//! Feasibility program for generalized partial joint-measurability.
//!
//! [`build_program`] lowers an assembly plus a guessable-outcome
//! specification to a block-PSD feasibility problem: one Hermitian block per
//! surviving effective operator (the deterministic-response elimination
//! happens at build time, so the partial-JM condition holds by
//! construction), with the no-signaling and consistency conditions as
//! Hermitian-valued affine equalities. [`solve`] decides feasibility through
//! a max-slack reformulation (`max t` such that every block `⪰ t·I`) run by
//! a dense primal barrier method over the nullspace of the equality
//! constraints. [`threshold`] brackets the critical detection efficiency by
//! bisection, and [`export_sdpa`] emits the same program in sparse SDPA
//! format for external cross-validation.

mod program;
mod sdpa;
mod solver;
mod threshold;

pub use program::{
    build_program, AffineConstraint, BlockKey, BlockSlot, ConstraintKind, GjmProgram,
};
pub use sdpa::{export_sdpa, parse_sdpa, SdpaProblem};
pub use solver::{solve, solve_with, FeasibilityReport, SolveOptions, Status};
pub use threshold::{
    feasible_at, threshold, GBuilder, ThresholdOptions, ThresholdResult, Transform,
};

use thiserror::Error;

use crate::povm::PovmError;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error("guessable-outcome spec does not fit the assembly: {0}")]
    SpecMismatch(String),
    #[error("lossy assembly infeasible at eta = 0; the program builder or solver is inconsistent")]
    InfeasibleAtZero,
    #[error("solver stalled at eta = {eta}: {diagnostic}")]
    SolverStalled { eta: f64, diagnostic: String },
    #[error("bisection tolerance must be positive, got {0}")]
    BadTolerance(f64),
}
