//! Generalized partial joint-measurability of quantum measurement assemblies.
//!
//! A measurement assembly is a finite set of POVMs indexed by a setting `y`.
//! Given a family `G = (G_y)` of guessable-outcome subsets, the assembly is
//! `G`-jointly measurable when the outcomes falling in `G_y` are fully
//! determined by classical information produced before the setting choice.
//! This crate decides that question with a small dense SDP feasibility
//! solver, locates critical detection efficiencies by bisection, constructs
//! and verifies explicit adversarial strategies saturating the analytic
//! thresholds, and evaluates the post-selection entropy counterexample for
//! loss-tolerant key distribution.
//!
//! Modules:
//! - [`matqm`]: dense complex-Hermitian matrix utilities and Bloch helpers.
//! - [`povm`]: assemblies, guessable-outcome specifications, loss/visibility
//!   transforms, JSON serialization.
//! - [`gjm_sdp`]: feasibility program builder, interior-point solver,
//!   threshold bisection, SDPA export.
//! - [`strategies`]: instruments, conditional measurements, strategy
//!   constructors and the verification report.
//! - [`bounds`]: closed-form efficiency thresholds and double-cone angles.
//! - [`postsel`]: Alice-Bob-Eve joint distribution, conditional entropies and
//!   key-rate differences, parity reconciliation demo.
//! - [`sweep`]: grid evaluation of analytic bounds vs. SDP thresholds.

pub mod bounds;
pub mod gjm_sdp;
pub mod matqm;
pub mod postsel;
pub mod povm;
pub mod strategies;
pub mod sweep;

pub use matqm::{BlochVec, CplxMat, HermMat};
pub use povm::{Assembly, GCase, GSpec, LossParams, Outcome, Povm};
