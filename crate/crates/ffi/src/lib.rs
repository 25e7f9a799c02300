//! C ABI over the partial joint-measurability library.
//!
//! Conventions: every function returns a [`GjmStatus`] code and writes its
//! results through out-pointers; handles are opaque and freed with the
//! matching `gjm_*_free`; strings returned by the library are freed with
//! [`gjm_string_free`]. On any non-OK status a human-readable message is
//! available from [`gjm_last_error_message`] until the next call on the
//! same thread. The generated header lives at `include/gjm.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::c_char;

use gjm_core::bounds::{self, CaseDVariant};
use gjm_core::gjm_sdp::{feasible_at, threshold, GBuilder, Status, ThresholdOptions, Transform};
use gjm_core::matqm::BlochVec;
use gjm_core::povm::{apply_loss, gspec_case, qubit_assembly, qubit_assembly_from_angles, GCase};
use gjm_core::strategies::{
    qubit_case_c_optimal_params, strat_case_d_generic, strat_full_jm, strat_partial_input,
    strat_partial_outcome_generic, strat_qubit_case_c, strat_qubit_case_d, verify_strategy,
};
use gjm_core::Assembly;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").expect("empty"));
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL-free message");
    });
}

/// Status code of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GjmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments outside the documented domain.
    InvalidArgument = 2,
    /// Malformed JSON or schema violation.
    ParseError = 3,
    /// The feasibility solver could not be driven to full accuracy.
    SolverDiagnostic = 4,
    /// Unexpected internal failure (a bug; see the error message).
    InternalError = 5,
}

/// Guessable-outcome family, mirroring the library cases a-d.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GjmCase {
    Full = 0,
    PartialInput = 1,
    PartialOutcome = 2,
    PartialInputOutcome = 3,
}

impl From<GjmCase> for GCase {
    fn from(c: GjmCase) -> Self {
        match c {
            GjmCase::Full => GCase::A,
            GjmCase::PartialInput => GCase::B,
            GjmCase::PartialOutcome => GCase::C,
            GjmCase::PartialInputOutcome => GCase::D,
        }
    }
}

/// Variant of the qubit partial input & outcome bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GjmCaseDVariant {
    N2 = 0,
    General = 1,
}

impl From<GjmCaseDVariant> for CaseDVariant {
    fn from(v: GjmCaseDVariant) -> Self {
        match v {
            GjmCaseDVariant::N2 => CaseDVariant::N2,
            GjmCaseDVariant::General => CaseDVariant::General,
        }
    }
}

/// Named adversarial strategy constructions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GjmStrategyKind {
    FullJm = 0,
    PartialInput = 1,
    PartialOutcome = 2,
    CaseDGeneric = 3,
    QubitC = 4,
    QubitD = 5,
}

/// Result of a threshold bisection.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GjmThreshold {
    pub eta_star: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub tol: f64,
    pub evaluations: u64,
    pub always_gjm: bool,
}

/// Entropy report of the post-selection counterexample (per round, bits).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GjmEntropy {
    pub h_a_given_e: f64,
    pub h_a_given_eprime: f64,
    pub i_ab_minus_ae: f64,
    pub i_ba_minus_be: f64,
}

/// Residuals of a strategy verification.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GjmVerification {
    pub consistency_residual: f64,
    pub nosignaling_residual: f64,
    pub partial_jm_residual: f64,
    pub guess_failure_prob: f64,
    pub completeness_residual: f64,
    pub min_psd_margin: f64,
    pub pass: bool,
}

/// Opaque measurement assembly handle.
pub struct GjmAssembly {
    inner: Assembly,
}

fn guard<F: FnOnce() -> GjmStatus>(f: F) -> GjmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GjmStatus::InternalError
        }
    }
}

/// Library version as a static string; never freed.
#[no_mangle]
pub extern "C" fn gjm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next library call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn gjm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through an out-pointer.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gjm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a projective qubit assembly from x-z plane angles
/// (`r_y = (sin a, 0, cos a)`).
///
/// # Safety
/// `angles` must point to `n_angles` doubles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_qubit_angles(
    angles: *const f64,
    n_angles: usize,
    out: *mut *mut GjmAssembly,
) -> GjmStatus {
    guard(|| {
        if angles.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let slice = std::slice::from_raw_parts(angles, n_angles);
        match qubit_assembly_from_angles(slice) {
            Ok(a) => {
                *out = Box::into_raw(Box::new(GjmAssembly { inner: a }));
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Parses an assembly from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_from_json(
    json: *const c_char,
    out: *mut *mut GjmAssembly,
) -> GjmStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("invalid UTF-8: {e}"));
                return GjmStatus::ParseError;
            }
        };
        match Assembly::from_json(text) {
            Ok(a) => {
                *out = Box::into_raw(Box::new(GjmAssembly { inner: a }));
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::ParseError
            }
        }
    })
}

/// Serializes an assembly to JSON; free the result with
/// [`gjm_string_free`].
///
/// # Safety
/// `assembly` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_to_json(
    assembly: *const GjmAssembly,
    out: *mut *mut c_char,
) -> GjmStatus {
    guard(|| {
        if assembly.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let text = (*assembly).inner.to_json();
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                GjmStatus::Ok
            }
            Err(_) => {
                set_error("serialized JSON contained NUL");
                GjmStatus::InternalError
            }
        }
    })
}

/// Hilbert-space dimension of the assembly.
///
/// # Safety
/// `assembly` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_dim(
    assembly: *const GjmAssembly,
    out: *mut usize,
) -> GjmStatus {
    guard(|| {
        if assembly.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        *out = (*assembly).inner.dim();
        GjmStatus::Ok
    })
}

/// Number of measurement settings.
///
/// # Safety
/// `assembly` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_settings(
    assembly: *const GjmAssembly,
    out: *mut usize,
) -> GjmStatus {
    guard(|| {
        if assembly.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        *out = (*assembly).inner.n_settings();
        GjmStatus::Ok
    })
}

/// Releases an assembly handle; null is ignored.
///
/// # Safety
/// `assembly` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gjm_assembly_free(assembly: *mut GjmAssembly) {
    if !assembly.is_null() {
        drop(Box::from_raw(assembly));
    }
}

/// Generic (measurement-independent) efficiency bound of a case.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_generic_bound(
    case: GjmCase,
    n: usize,
    k: usize,
    out: *mut f64,
) -> GjmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        match bounds::generic_bound(case.into(), n, k) {
            Ok(b) => {
                *out = b;
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Qubit partial-outcome bound `1/(1 + sin(θ/2))`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_qubit_bound_case_c(theta: f64, out: *mut f64) -> GjmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        match bounds::qubit_bound_case_c(theta) {
            Ok(b) => {
                *out = b;
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Qubit partial input & outcome bound for the given variant.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_qubit_bound_case_d(
    theta: f64,
    variant: GjmCaseDVariant,
    out: *mut f64,
) -> GjmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        match bounds::qubit_bound_case_d(theta, variant.into()) {
            Ok(b) => {
                *out = b;
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Smallest double-cone aperture containing the given measurement axes.
/// `directions` holds `3 * n_directions` doubles (x, y, z triples);
/// `out_axis`, when non-null, receives the optimal axis.
///
/// # Safety
/// `directions` must point to `3 * n_directions` doubles; `out_theta` must
/// be valid; `out_axis` is optional but must point to 3 doubles when
/// non-null.
#[no_mangle]
pub unsafe extern "C" fn gjm_double_cone_angle(
    directions: *const f64,
    n_directions: usize,
    out_theta: *mut f64,
    out_axis: *mut f64,
) -> GjmStatus {
    guard(|| {
        if directions.is_null() || out_theta.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let flat = std::slice::from_raw_parts(directions, 3 * n_directions);
        let dirs: Vec<BlochVec> = flat
            .chunks_exact(3)
            .map(|c| BlochVec::new(c[0], c[1], c[2]))
            .collect();
        match bounds::double_cone_angle(&dirs) {
            Ok(cone) => {
                *out_theta = cone.theta;
                if !out_axis.is_null() {
                    let axis = std::slice::from_raw_parts_mut(out_axis, 3);
                    axis[0] = cone.axis.x;
                    axis[1] = cone.axis.y;
                    axis[2] = cone.axis.z;
                }
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Feasibility of the lossy assembly (ideal effects transformed at `eta`
/// and visibility `nu_vis`) under the guessable subsets of `case`. Writes
/// the max-slack value and whether the program is compatible (marginal
/// counts as compatible).
///
/// # Safety
/// `assembly` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_feasible(
    assembly: *const GjmAssembly,
    case: GjmCase,
    eta: f64,
    nu_vis: f64,
    tol: f64,
    out_slack: *mut f64,
    out_feasible: *mut bool,
) -> GjmStatus {
    guard(|| {
        if assembly.is_null() || out_slack.is_null() || out_feasible.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let transform = if (nu_vis - 1.0).abs() < 1e-15 {
            Transform::Loss
        } else {
            Transform::LossVisibility { nu_vis }
        };
        let solver_tol = if tol > 0.0 { tol } else { 1e-7 };
        match feasible_at(
            &(*assembly).inner,
            &GBuilder::Case(case.into()),
            &transform,
            eta,
            solver_tol,
        ) {
            Ok((_, report)) => {
                *out_slack = report.slack;
                *out_feasible = report.status != Status::Infeasible;
                GjmStatus::Ok
            }
            Err(gjm_core::gjm_sdp::SdpError::SolverStalled { eta, diagnostic }) => {
                set_error(&format!("stalled at eta = {eta}: {diagnostic}"));
                GjmStatus::SolverDiagnostic
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Critical detection efficiency by bisection; `tol <= 0` selects the
/// default bracket width 1e-4.
///
/// # Safety
/// `assembly` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_threshold(
    assembly: *const GjmAssembly,
    case: GjmCase,
    nu_vis: f64,
    tol: f64,
    out: *mut GjmThreshold,
) -> GjmStatus {
    guard(|| {
        if assembly.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let transform = if (nu_vis - 1.0).abs() < 1e-15 {
            Transform::Loss
        } else {
            Transform::LossVisibility { nu_vis }
        };
        let opts = ThresholdOptions {
            tol: if tol > 0.0 { tol } else { 1e-4 },
            ..Default::default()
        };
        match threshold(
            &(*assembly).inner,
            &GBuilder::Case(case.into()),
            &transform,
            &opts,
        ) {
            Ok(r) => {
                *out = GjmThreshold {
                    eta_star: r.eta_star,
                    eta_lo: r.bracket.0,
                    eta_hi: r.bracket.1,
                    tol: r.tol,
                    evaluations: r.evaluations as u64,
                    always_gjm: r.always_gjm,
                };
                GjmStatus::Ok
            }
            Err(gjm_core::gjm_sdp::SdpError::SolverStalled { eta, diagnostic }) => {
                set_error(&format!("stalled at eta = {eta}: {diagnostic}"));
                GjmStatus::SolverDiagnostic
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Entropy report of the post-selection counterexample, per round in bits.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_entropy(d: u32, eta: f64, out: *mut GjmEntropy) -> GjmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        match gjm_core::postsel::abe_dist(d as usize, eta) {
            Ok(dist) => {
                let r = gjm_core::postsel::entropies(&dist);
                *out = GjmEntropy {
                    h_a_given_e: r.h_a_given_e,
                    h_a_given_eprime: r.h_a_given_eprime,
                    i_ab_minus_ae: r.i_ab_minus_ae,
                    i_ba_minus_be: r.i_ba_minus_be,
                };
                GjmStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GjmStatus::InvalidArgument
            }
        }
    })
}

/// Builds a named strategy on a standard assembly family and verifies it.
/// Generic kinds use `k` conclusive outcomes and `n` settings of the
/// planar symmetric family; qubit kinds use the pair `{Z, cosθZ+sinθX}`.
/// A negative `eta` selects the strategy's own bound. `tol <= 0` selects
/// 1e-9.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gjm_verify_named_strategy(
    kind: GjmStrategyKind,
    k: usize,
    n: usize,
    theta: f64,
    eta: f64,
    variant: GjmCaseDVariant,
    tol: f64,
    out: *mut GjmVerification,
) -> GjmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GjmStatus::NullArgument;
        }
        let tol = if tol > 0.0 { tol } else { 1e-9 };
        let result = build_and_verify(kind, k, n, theta, eta, variant.into(), tol);
        match result {
            Ok(report) => {
                *out = GjmVerification {
                    consistency_residual: report.consistency_residual,
                    nosignaling_residual: report.nosignaling_residual,
                    partial_jm_residual: report.partial_jm_residual,
                    guess_failure_prob: report.guess_failure_prob,
                    completeness_residual: report.completeness_residual,
                    min_psd_margin: report.min_psd_margin(),
                    pass: report.passes(tol),
                };
                GjmStatus::Ok
            }
            Err(msg) => {
                set_error(&msg);
                GjmStatus::InvalidArgument
            }
        }
    })
}

fn planar_assembly(k: usize, n: usize) -> Result<Assembly, String> {
    use gjm_core::povm::{Outcome, Povm};
    if k < 2 || n < 1 {
        return Err("need k >= 2 and n >= 1".into());
    }
    let povms = (0..n)
        .map(|y| {
            let phase = std::f64::consts::PI * y as f64 / (k * n) as f64;
            let effects = gjm_core::matqm::planar_symmetric_povm(k, phase);
            let labels = (1..=k as u32).map(Outcome::Click).collect();
            Povm::new(labels, effects).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Assembly::new(povms).map_err(|e| e.to_string())
}

fn build_and_verify(
    kind: GjmStrategyKind,
    k: usize,
    n: usize,
    theta: f64,
    eta: f64,
    variant: CaseDVariant,
    tol: f64,
) -> Result<gjm_core::strategies::VerificationReport, String> {
    let qubit_dirs = || vec![BlochVec::Z, BlochVec::xz_plane(theta)];
    let (ideal, case, bound) = match kind {
        GjmStrategyKind::FullJm => (planar_assembly(k, n)?, GCase::A, 1.0 / n as f64),
        GjmStrategyKind::PartialInput => (planar_assembly(k, n)?, GCase::B, 0.5),
        GjmStrategyKind::PartialOutcome => (planar_assembly(k, n)?, GCase::C, 1.0 / k as f64),
        GjmStrategyKind::CaseDGeneric => (
            planar_assembly(k, n)?,
            GCase::D,
            k as f64 / (2.0 * k as f64 - 1.0),
        ),
        GjmStrategyKind::QubitC => {
            let dirs = qubit_dirs();
            let (_, _, bound) = qubit_case_c_optimal_params(&dirs).map_err(|e| e.to_string())?;
            (
                qubit_assembly(&dirs).map_err(|e| e.to_string())?,
                GCase::C,
                bound,
            )
        }
        GjmStrategyKind::QubitD => {
            let dirs = qubit_dirs();
            let bound = bounds::qubit_bound_case_d(theta, variant).map_err(|e| e.to_string())?;
            (
                qubit_assembly(&dirs).map_err(|e| e.to_string())?,
                GCase::D,
                bound,
            )
        }
    };
    let eta = if eta < 0.0 { bound } else { eta };
    let strategy = match kind {
        GjmStrategyKind::FullJm => strat_full_jm(&ideal, eta),
        GjmStrategyKind::PartialInput => strat_partial_input(&ideal, eta),
        GjmStrategyKind::PartialOutcome => strat_partial_outcome_generic(&ideal, eta),
        GjmStrategyKind::CaseDGeneric => strat_case_d_generic(&ideal, eta),
        GjmStrategyKind::QubitC => {
            let dirs = qubit_dirs();
            let (m, nu, _) = qubit_case_c_optimal_params(&dirs).map_err(|e| e.to_string())?;
            strat_qubit_case_c(&dirs, &m, nu, eta)
        }
        GjmStrategyKind::QubitD => {
            let dirs = qubit_dirs();
            strat_qubit_case_d(&dirs, variant, eta)
        }
    }
    .map_err(|e| e.to_string())?;
    let lossy = apply_loss(&ideal, eta).map_err(|e| e.to_string())?;
    let g = gspec_case(case, &lossy).map_err(|e| e.to_string())?;
    verify_strategy(&strategy, &lossy, &g, tol).map_err(|e| e.to_string())
}
