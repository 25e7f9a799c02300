//! Grid evaluation of analytic bounds against SDP thresholds for the
//! two-measurement family `{Z, cos(θ) Z + sin(θ) X}`.
//!
//! Rows are emitted in deterministic grid order (grid value, then case, in
//! the requested order) regardless of how the worker pool schedules the
//! solves. Per-point solver failures are recorded in the row and the sweep
//! continues.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, CaseDVariant};
use crate::gjm_sdp::{threshold, GBuilder, ThresholdOptions, Transform};
use crate::povm::{qubit_assembly_from_angles, GCase};

/// Swept parameter; the other one stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    Theta,
    NuVis,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "theta" => Ok(SweepParameter::Theta),
            "nu_vis" | "nu-vis" | "nuvis" => Ok(SweepParameter::NuVis),
            other => Err(format!(
                "unknown sweep parameter {other:?} (theta | nu_vis)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Analytic,
    Sdp,
    Both,
}

impl std::str::FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(SweepMode::Analytic),
            "sdp" => Ok(SweepMode::Sdp),
            "both" => Ok(SweepMode::Both),
            other => Err(format!(
                "unknown sweep mode {other:?} (analytic | sdp | both)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// `(start, stop, steps)` with `steps >= 2`; endpoints included.
    pub range: (f64, f64, usize),
    /// Fixed separation angle when sweeping the visibility.
    pub fixed_theta: f64,
    /// Fixed visibility when sweeping the angle.
    pub fixed_nu_vis: f64,
    pub cases: Vec<GCase>,
    pub mode: SweepMode,
    pub bisection_tol: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), String> {
        let (start, stop, steps) = self.range;
        if steps < 2 {
            return Err(format!("steps must be at least 2, got {steps}"));
        }
        if !(start.is_finite() && stop.is_finite() && start <= stop) {
            return Err(format!("bad range [{start}, {stop}]"));
        }
        let domain = match self.parameter {
            SweepParameter::Theta => (0.0, std::f64::consts::FRAC_PI_2),
            SweepParameter::NuVis => (0.0, 1.0),
        };
        // a little slop admits rounded endpoints like 1.5708 for π/2
        if start < domain.0 - 1e-3 || stop > domain.1 + 1e-3 {
            return Err(format!(
                "range [{start}, {stop}] outside the parameter domain [{}, {}]",
                domain.0, domain.1
            ));
        }
        if self.cases.is_empty() {
            return Err("no cases requested".into());
        }
        if !(self.bisection_tol > 0.0) {
            return Err("bisection tolerance must be positive".into());
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let (start, stop, steps) = self.range;
        let domain = match self.parameter {
            SweepParameter::Theta => (0.0, std::f64::consts::FRAC_PI_2),
            SweepParameter::NuVis => (0.0, 1.0),
        };
        (0..steps)
            .map(|i| {
                (start + (stop - start) * i as f64 / (steps - 1) as f64).clamp(domain.0, domain.1)
            })
            .collect()
    }
}

/// One sweep row; `None` marks quantities not requested or failed solves.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub nu_vis: f64,
    pub case: GCase,
    pub eta_analytic: Option<f64>,
    pub eta_sdp: Option<f64>,
    pub gap: Option<f64>,
    /// Solver diagnostic when the SDP column failed.
    pub note: Option<String>,
}

/// Loss-only analytic reference bound for the two-measurement family at
/// separation `theta` (the visibility transform has no closed form here).
fn analytic_bound(case: GCase, theta: f64) -> Option<f64> {
    match case {
        GCase::A | GCase::B => bounds::generic_bound(case, 2, 2).ok(),
        GCase::C => bounds::qubit_bound_case_c(theta).ok(),
        GCase::D => bounds::qubit_bound_case_d(theta, CaseDVariant::N2).ok(),
    }
}

/// Runs the sweep on the ambient rayon pool (size it with
/// `rayon::ThreadPoolBuilder` or run inside `pool.install`); rows come back
/// in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, String> {
    spec.validate()?;
    let grid = spec.grid();
    let points: Vec<(f64, GCase)> = grid
        .iter()
        .flat_map(|&v| spec.cases.iter().map(move |&c| (v, c)))
        .collect();

    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(value, case)| {
            let (theta, nu_vis) = match spec.parameter {
                SweepParameter::Theta => (value, spec.fixed_nu_vis),
                SweepParameter::NuVis => (spec.fixed_theta, value),
            };
            let eta_analytic = if matches!(spec.mode, SweepMode::Analytic | SweepMode::Both) {
                analytic_bound(case, theta)
            } else {
                None
            };
            let (eta_sdp, note) = if matches!(spec.mode, SweepMode::Sdp | SweepMode::Both) {
                match sdp_threshold(case, theta, nu_vis, spec.bisection_tol) {
                    Ok(eta) => (Some(eta), None),
                    Err(msg) => (None, Some(msg)),
                }
            } else {
                (None, None)
            };
            let gap = match (eta_analytic, eta_sdp) {
                (Some(a), Some(s)) => Some(s - a),
                _ => None,
            };
            SweepRow {
                theta,
                nu_vis,
                case,
                eta_analytic,
                eta_sdp,
                gap,
                note,
            }
        })
        .collect();
    Ok(rows)
}

fn sdp_threshold(case: GCase, theta: f64, nu_vis: f64, tol: f64) -> Result<f64, String> {
    let assembly = qubit_assembly_from_angles(&[0.0, theta]).map_err(|e| e.to_string())?;
    let transform = if (nu_vis - 1.0).abs() < 1e-15 {
        Transform::Loss
    } else {
        Transform::LossVisibility { nu_vis }
    };
    let result = threshold(
        &assembly,
        &GBuilder::Case(case),
        &transform,
        &ThresholdOptions {
            tol,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    Ok(result.eta_star)
}

/// Formats a float with 9 significant digits, the stable CSV contract.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return "nan".into();
    }
    let formatted = format!("{x:.8e}");
    // prefer positional notation in the human range, like printf %.9g
    let exp: i32 = formatted
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-4..9).contains(&exp) {
        let digits = (8 - exp).max(0) as usize;
        let s = format!("{x:.digits$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        formatted
    }
}

/// CSV header fixed by the output contract.
pub const CSV_HEADER: &str = "theta,nu_vis,case,eta_analytic,eta_sdp,gap";

pub fn row_to_csv(row: &SweepRow) -> String {
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_else(|| "nan".into());
    format!(
        "{},{},{},{},{},{}",
        fmt_sig9(row.theta),
        fmt_sig9(row.nu_vis),
        row.case,
        opt(row.eta_analytic),
        opt(row.eta_sdp),
        opt(row.gap)
    )
}
