//! Critical detection efficiency by bisection.
//!
//! The feasible set of efficiencies is downward closed: the all-no-click
//! device is trivially reproducible, the lossy effects are affine in `η`,
//! and a convex combination of a feasible witness at `η₂` with the
//! all-no-click witness solves the program at any `η₁ < η₂` (this
//! construction is exercised explicitly by the property tests). Bisection on
//! a feasible/infeasible bracket is therefore sound. A marginal solve counts
//! as feasible, keeping the reported threshold an inner approximation.

use crate::povm::{apply_loss_visibility, gspec_case, Assembly, GCase, GSpec, LossParams};

use super::program::GjmProgram;
use super::solver::{solve, FeasibilityReport, Status};
use super::SdpError;

/// How to build the guessable subsets for the lossy assembly at each probe.
#[derive(Debug, Clone)]
pub enum GBuilder {
    Case(GCase),
    Explicit(GSpec),
}

impl GBuilder {
    fn build(&self, lossy: &Assembly) -> Result<GSpec, SdpError> {
        match self {
            GBuilder::Case(c) => Ok(gspec_case(*c, lossy)?),
            GBuilder::Explicit(g) => {
                GSpec::new(g.subsets().to_vec(), lossy).map_err(SdpError::from)
            }
        }
    }
}

/// Loss-only or loss-plus-visibility transform with every parameter except
/// the probed efficiency fixed.
#[derive(Debug, Clone, Copy)]
pub enum Transform {
    Loss,
    LossVisibility { nu_vis: f64 },
}

impl Transform {
    pub fn apply(&self, a: &Assembly, eta: f64) -> Result<Assembly, SdpError> {
        let params = match self {
            Transform::Loss => LossParams::new(eta, 1.0)?,
            Transform::LossVisibility { nu_vis } => LossParams::new(eta, *nu_vis)?,
        };
        Ok(apply_loss_visibility(a, params)?)
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdOptions {
    /// Bracket width target for the bisection.
    pub tol: f64,
    /// Classification tolerance handed to the solver at each probe.
    pub solver_tol: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            solver_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    /// Certified-feasible end of the bracket.
    pub eta_star: f64,
    /// `(largest efficiency found feasible, smallest found infeasible)`.
    pub bracket: (f64, f64),
    pub tol: f64,
    /// Number of feasibility solves.
    pub evaluations: usize,
    /// Set when the assembly stays compatible all the way to `η = 1`.
    pub always_gjm: bool,
}

/// Builds and solves the program for `a_ideal` transformed at efficiency
/// `eta`. Returns the lowered program together with the solver report.
pub fn feasible_at(
    a_ideal: &Assembly,
    g: &GBuilder,
    transform: &Transform,
    eta: f64,
    solver_tol: f64,
) -> Result<(GjmProgram, FeasibilityReport), SdpError> {
    let lossy = transform.apply(a_ideal, eta)?;
    let gspec = g.build(&lossy)?;
    let program = super::build_program(&lossy, &gspec)?;
    let report = solve(&program, solver_tol);
    if let Some(diag) = &report.diagnostic {
        return Err(SdpError::SolverStalled {
            eta,
            diagnostic: diag.clone(),
        });
    }
    Ok((program, report))
}

/// Bisection for the largest efficiency at which the transformed assembly
/// stays compatible with the guessable-subset specification.
pub fn threshold(
    a_ideal: &Assembly,
    g: &GBuilder,
    transform: &Transform,
    opts: &ThresholdOptions,
) -> Result<ThresholdResult, SdpError> {
    if !(opts.tol > 0.0) {
        return Err(SdpError::BadTolerance(opts.tol));
    }
    let mut evaluations = 0;
    let mut probe = |eta: f64| -> Result<bool, SdpError> {
        let (_, report) = feasible_at(a_ideal, g, transform, eta, opts.solver_tol)?;
        evaluations += 1;
        log::info!(
            "threshold probe eta = {eta:.6}: {} (slack {:.3e}, {} Newton steps)",
            report.status,
            report.slack,
            report.iterations
        );
        // marginal counts as feasible: boundary points are compatible
        Ok(report.status != Status::Infeasible)
    };

    if !probe(0.0)? {
        return Err(SdpError::InfeasibleAtZero);
    }
    if probe(1.0)? {
        return Ok(ThresholdResult {
            eta_star: 1.0,
            bracket: (1.0, 1.0),
            tol: opts.tol,
            evaluations,
            always_gjm: true,
        });
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        eta_star: lo,
        bracket: (lo, hi),
        tol: opts.tol,
        evaluations,
        always_gjm: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds;
    use crate::matqm::BlochVec;
    use crate::povm::qubit_assembly;
    use std::f64::consts::FRAC_PI_2;

    fn zx() -> Assembly {
        qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap()
    }

    #[test]
    fn zx_case_a_threshold_is_half() {
        let r = threshold(
            &zx(),
            &GBuilder::Case(crate::povm::GCase::A),
            &Transform::Loss,
            &ThresholdOptions::default(),
        )
        .unwrap();
        assert!(!r.always_gjm);
        assert!(r.bracket.1 - r.bracket.0 <= r.tol);
        assert!(
            (r.eta_star - 0.5).abs() < 1e-3,
            "eta* = {}, expected 0.5",
            r.eta_star
        );
    }

    #[test]
    fn zx_case_c_threshold_matches_closed_form() {
        let r = threshold(
            &zx(),
            &GBuilder::Case(crate::povm::GCase::C),
            &Transform::Loss,
            &ThresholdOptions::default(),
        )
        .unwrap();
        let expect = bounds::qubit_bound_case_c(FRAC_PI_2).unwrap();
        assert!(
            (r.eta_star - expect).abs() < 1e-3,
            "eta* = {}, expected {expect}",
            r.eta_star
        );
    }

    #[test]
    fn zx_case_d_threshold_matches_closed_form() {
        let r = threshold(
            &zx(),
            &GBuilder::Case(crate::povm::GCase::D),
            &Transform::Loss,
            &ThresholdOptions::default(),
        )
        .unwrap();
        assert!(
            (r.eta_star - 2.0 / 3.0).abs() < 1e-3,
            "eta* = {}, expected 2/3",
            r.eta_star
        );
    }

    #[test]
    fn coincident_axes_are_always_compatible() {
        let a = qubit_assembly(&[BlochVec::Z, BlochVec::Z]).unwrap();
        let r = threshold(
            &a,
            &GBuilder::Case(crate::povm::GCase::C),
            &Transform::Loss,
            &ThresholdOptions::default(),
        )
        .unwrap();
        assert!(r.always_gjm);
        assert_eq!(r.eta_star, 1.0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let err = threshold(
            &zx(),
            &GBuilder::Case(crate::povm::GCase::A),
            &Transform::Loss,
            &ThresholdOptions {
                tol: 0.0,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(SdpError::BadTolerance(_))));
    }
}
