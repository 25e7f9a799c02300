//! Closed-form detection-efficiency thresholds, double-cone angles, and the
//! auxiliary validity bounds for the qubit weak-measurement strategies.
//!
//! The double-cone angle of a set of measurement axes is the aperture of the
//! smallest double cone containing all axes; directions `r` and `-r` are
//! identified throughout (absolute values of overlaps), and reported axes
//! are normalized to the hemisphere `z > 0` (ties broken toward `x > 0`,
//! then `y > 0`) so results are deterministic.

use std::f64::consts::PI;

use thiserror::Error;

use crate::matqm::BlochVec;
use crate::povm::GCase;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("need at least one direction")]
    NoDirections,
    #[error("direction {index} is not a unit vector (|r| = {norm})")]
    NotUnit { index: usize, norm: f64 },
    #[error("theta = {0} outside the domain [0, {1}]")]
    ThetaOutOfRange(f64, f64),
    #[error("parameter {name} = {value} outside {domain}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("case {case} needs {what}")]
    MissingParameter { case: char, what: &'static str },
}

/// Generic (measurement-independent) threshold of Table-style strategies:
/// full `1/n`, partial-input `1/2`, partial-outcome `max{1/n, 1/k}`, and
/// partial input & outcome `k/(2k-1)`.
pub fn generic_bound(case: GCase, n: usize, k: usize) -> Result<f64, BoundsError> {
    if n == 0 {
        return Err(BoundsError::ParamOutOfRange {
            name: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    if k == 0 {
        return Err(BoundsError::ParamOutOfRange {
            name: "k",
            value: 0.0,
            domain: "k >= 1",
        });
    }
    Ok(match case {
        GCase::A => 1.0 / n as f64,
        GCase::B => 0.5,
        GCase::C => (1.0 / n as f64).max(1.0 / k as f64),
        GCase::D => {
            let k = k as f64;
            k / (2.0 * k - 1.0)
        }
    })
}

/// Result of the double-cone minimization: the aperture `theta`, the
/// optimal cone axis, and the angles `arccos|m·r_y|` of each measurement
/// axis from the cone axis.
#[derive(Debug, Clone)]
pub struct ConeResult {
    pub theta: f64,
    pub axis: BlochVec,
    pub per_axis_angles: Vec<f64>,
}

fn canonical_hemisphere(m: BlochVec) -> BlochVec {
    const EPS: f64 = 1e-12;
    if m.z > EPS {
        return m;
    }
    if m.z < -EPS {
        return m.scale(-1.0);
    }
    if m.x > EPS {
        return m;
    }
    if m.x < -EPS {
        return m.scale(-1.0);
    }
    if m.y >= 0.0 {
        m
    } else {
        m.scale(-1.0)
    }
}

fn validate_units(dirs: &[BlochVec]) -> Result<(), BoundsError> {
    if dirs.is_empty() {
        return Err(BoundsError::NoDirections);
    }
    for (i, r) in dirs.iter().enumerate() {
        if !r.is_unit(1e-9) {
            return Err(BoundsError::NotUnit {
                index: i,
                norm: r.norm(),
            });
        }
    }
    Ok(())
}

/// Half-aperture objective `max_y arccos|m·r_y|` for a candidate axis.
fn half_aperture(m: &BlochVec, dirs: &[BlochVec]) -> f64 {
    dirs.iter()
        .map(|r| m.dot(r).abs().min(1.0).acos())
        .fold(0.0, f64::max)
}

/// Smallest double-cone aperture containing all measurement axes.
///
/// One direction gives `theta = 0`. Two directions use the closed form
/// `theta = arccos|r_1·r_2|` with the bisector of the folded pair as axis.
/// Three or more run a spherical Fibonacci grid (10^4 points) followed by
/// Nelder-Mead refinement in tangent-plane coordinates, restarted from the
/// 20 best grid cells; ties are broken by lexicographic axis coordinates.
pub fn double_cone_angle(dirs: &[BlochVec]) -> Result<ConeResult, BoundsError> {
    validate_units(dirs)?;
    let axis = match dirs.len() {
        1 => dirs[0],
        2 => {
            let folded = if dirs[0].dot(&dirs[1]) >= 0.0 {
                dirs[1]
            } else {
                dirs[1].scale(-1.0)
            };
            let sum = dirs[0].add(&folded);
            if sum.norm() < 1e-9 {
                // antipodal pair, any bisector works; this branch cannot be
                // reached for |r1·r2| >= 0 folding
                dirs[0]
            } else {
                sum.normalized().expect("non-degenerate bisector")
            }
        }
        _ => minimax_axis(dirs),
    };
    let axis = canonical_hemisphere(axis);
    let per_axis_angles: Vec<f64> = dirs
        .iter()
        .map(|r| axis.dot(r).abs().min(1.0).acos())
        .collect();
    let theta = 2.0 * half_aperture(&axis, dirs);
    Ok(ConeResult {
        theta,
        axis,
        per_axis_angles,
    })
}

/// Largest angle between the first (key-generating) axis and the rest,
/// `max_{y>=2} arccos|r_1·r_y|`, in `[0, π/2]`.
pub fn case_d_axis_angle(dirs: &[BlochVec]) -> Result<f64, BoundsError> {
    validate_units(dirs)?;
    Ok(dirs[1..]
        .iter()
        .map(|r| dirs[0].dot(r).abs().min(1.0).acos())
        .fold(0.0, f64::max))
}

fn fibonacci_sphere(n: usize) -> impl Iterator<Item = BlochVec> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        BlochVec::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn tangent_frame(m: &BlochVec) -> (BlochVec, BlochVec) {
    let helper = if m.z.abs() < 0.9 {
        BlochVec::Z
    } else {
        BlochVec::X
    };
    let e1 = m.cross(&helper).normalized().expect("helper not parallel");
    let e2 = m.cross(&e1);
    (e1, e2)
}

/// Nelder-Mead on the half-aperture objective in tangent-plane coordinates
/// around `start`, re-centered between rounds.
fn refine_axis(start: BlochVec, dirs: &[BlochVec], initial_scale: f64) -> (BlochVec, f64) {
    let mut center = start;
    let mut scale = initial_scale;
    for _ in 0..4 {
        let (e1, e2) = tangent_frame(&center);
        let lift = |u: f64, v: f64| -> BlochVec {
            center
                .add(&e1.scale(u))
                .add(&e2.scale(v))
                .normalized()
                .expect("lift stays away from zero for small u, v")
        };
        let f = |p: &[f64; 2]| half_aperture(&lift(p[0], p[1]), dirs);

        let mut simplex = [[0.0, 0.0], [scale, 0.0], [0.0, scale]];
        let mut values = simplex.map(|p| f(&p));
        for _ in 0..300 {
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let (best, mid, worst) = (order[0], order[1], order[2]);
            let spread = (values[worst] - values[best]).abs();
            let size = simplex
                .iter()
                .map(|p| {
                    ((p[0] - simplex[best][0]).powi(2) + (p[1] - simplex[best][1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max);
            if spread < 1e-13 && size < 1e-11 {
                break;
            }
            let centroid = [
                (simplex[best][0] + simplex[mid][0]) / 2.0,
                (simplex[best][1] + simplex[mid][1]) / 2.0,
            ];
            let reflect = [
                centroid[0] + (centroid[0] - simplex[worst][0]),
                centroid[1] + (centroid[1] - simplex[worst][1]),
            ];
            let fr = f(&reflect);
            if fr < values[best] {
                let expand = [
                    centroid[0] + 2.0 * (centroid[0] - simplex[worst][0]),
                    centroid[1] + 2.0 * (centroid[1] - simplex[worst][1]),
                ];
                let fe = f(&expand);
                if fe < fr {
                    simplex[worst] = expand;
                    values[worst] = fe;
                } else {
                    simplex[worst] = reflect;
                    values[worst] = fr;
                }
            } else if fr < values[mid] {
                simplex[worst] = reflect;
                values[worst] = fr;
            } else {
                let contract = [
                    centroid[0] + 0.5 * (simplex[worst][0] - centroid[0]),
                    centroid[1] + 0.5 * (simplex[worst][1] - centroid[1]),
                ];
                let fc = f(&contract);
                if fc < values[worst] {
                    simplex[worst] = contract;
                    values[worst] = fc;
                } else {
                    for i in 0..3 {
                        if i != best {
                            simplex[i] = [
                                simplex[best][0] + 0.5 * (simplex[i][0] - simplex[best][0]),
                                simplex[best][1] + 0.5 * (simplex[i][1] - simplex[best][1]),
                            ];
                            values[i] = f(&simplex[i]);
                        }
                    }
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        center = lift(simplex[order[0]][0], simplex[order[0]][1]);
        scale *= 0.05;
    }
    (center, half_aperture(&center, dirs))
}

fn minimax_axis(dirs: &[BlochVec]) -> BlochVec {
    const GRID: usize = 10_000;
    const RESTARTS: usize = 20;
    let mut graded: Vec<(f64, BlochVec)> = fibonacci_sphere(GRID)
        .map(|m| (half_aperture(&m, dirs), m))
        .collect();
    graded.sort_by(|a, b| a.0.total_cmp(&b.0));

    // pick well-separated starting cells among the best grid points
    let mut starts: Vec<BlochVec> = Vec::with_capacity(RESTARTS);
    for (_, m) in &graded {
        if starts.len() == RESTARTS {
            break;
        }
        if starts.iter().all(|s| s.dot(m).abs() < 0.999) {
            starts.push(*m);
        }
    }

    let grid_spacing = 2.0 / (GRID as f64).sqrt();
    let mut results: Vec<(f64, BlochVec)> = starts
        .iter()
        .map(|&s| {
            let (axis, value) = refine_axis(s, dirs, grid_spacing);
            (value, canonical_hemisphere(axis))
        })
        .collect();
    results.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            a.1.x
                .total_cmp(&b.1.x)
                .then(a.1.y.total_cmp(&b.1.y))
                .then(a.1.z.total_cmp(&b.1.z))
        })
    });
    let best = results[0];
    let agreeing = results.iter().filter(|r| r.0 - best.0 <= 1e-7).count();
    if agreeing < 2 {
        log::warn!(
            "double-cone restarts disagree: best {best:.9?} confirmed by {agreeing} of {} runs",
            results.len()
        );
    }
    best.1
}

/// Qubit partial-outcome threshold `1/(1 + sin(θ/2))` for a double-cone
/// aperture `θ ∈ [0, π]`.
pub fn qubit_bound_case_c(theta: f64) -> Result<f64, BoundsError> {
    if !(0.0..=PI).contains(&theta) {
        return Err(BoundsError::ThetaOutOfRange(theta, PI));
    }
    Ok(1.0 / (1.0 + (theta / 2.0).sin()))
}

/// Variant of the qubit partial input & outcome bound: the two-measurement
/// optimum or the cone-axis construction valid for any number of
/// measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CaseDVariant {
    N2,
    General,
}

impl std::str::FromStr for CaseDVariant {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n2" | "n2-optimal" => Ok(CaseDVariant::N2),
            "general" | "cone-axis" => Ok(CaseDVariant::General),
            _ => Err(BoundsError::ParamOutOfRange {
                name: "variant",
                value: f64::NAN,
                domain: "n2 | general",
            }),
        }
    }
}

/// Qubit partial input & outcome threshold for axis separation
/// `θ ∈ [0, π/2]`: `2/(2 + sin θ)` for the two-measurement optimum, or
/// `(1 + sin θ)/(1 + 2 sin θ)` for the cone-axis construction.
pub fn qubit_bound_case_d(theta: f64, variant: CaseDVariant) -> Result<f64, BoundsError> {
    if !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
        return Err(BoundsError::ThetaOutOfRange(theta, PI / 2.0));
    }
    let s = theta.sin();
    Ok(match variant {
        CaseDVariant::N2 => 2.0 / (2.0 + s),
        CaseDVariant::General => (1.0 + s) / (1.0 + 2.0 * s),
    })
}

/// Difference between the two case-d bounds,
/// `sin θ (1 - sin θ) / [(2 + sin θ)(1 + 2 sin θ)]`, nonnegative on
/// `[0, π/2]`.
pub fn case_d_bound_gap(theta: f64) -> f64 {
    let s = theta.sin();
    s * (1.0 - s) / ((2.0 + s) * (1.0 + 2.0 * s))
}

/// Optimal weak-measurement parameters of the case-d strategies.
#[derive(Debug, Clone)]
pub struct CaseDParams {
    /// Angle of the weak-measurement axis from the first measurement axis;
    /// `None` for the cone-axis variant where the axis is pinned to `r_1`.
    pub x_star: Option<f64>,
    /// Weak-measurement strength.
    pub nu_star: f64,
    /// Classical post-processing bias for the non-key settings: the
    /// two-measurement value `cos θ`, or the cone-edge stationary value
    /// `cos θ / (1 + sin θ)` for the cone-axis variant.
    pub gamma: Vec<f64>,
    pub variant: CaseDVariant,
}

/// Closed-form optimal parameters for the case-d strategies at axis
/// separation `theta ∈ [0, π/2]`.
pub fn case_d_params(theta: f64, variant: CaseDVariant) -> Result<CaseDParams, BoundsError> {
    if !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
        return Err(BoundsError::ThetaOutOfRange(theta, PI / 2.0));
    }
    let (s, c) = (theta.sin(), theta.cos());
    match variant {
        CaseDVariant::N2 => {
            let denom = (1.0 + 3.0 * c * c).sqrt();
            let cos_x = (1.0 + c * c) / denom;
            let sin_x = (s * c) / denom;
            let x_star = sin_x.atan2(cos_x);
            let nu_star = denom / (2.0 + s);
            // admissibility of the stationary branch:
            // nu*(cos(θ-x*) + sin(θ-x*)) = (2cosθ + sinθ)/(2+sinθ) <= 1
            let admissibility = (2.0 * c + s) / (2.0 + s);
            debug_assert!(admissibility <= 1.0 + 1e-12);
            Ok(CaseDParams {
                x_star: Some(x_star),
                nu_star,
                gamma: vec![c],
                variant,
            })
        }
        CaseDVariant::General => {
            let nu_star = 1.0 / (1.0 + 2.0 * s);
            // stationary γ at the cone edge t = cos θ:
            // γ* = ν t / (1 - ν √(1-t²)) = cos θ / (1 + sin θ) <= 1
            let gamma_edge = c / (1.0 + s);
            debug_assert!(gamma_edge <= 1.0 / (1.0 + s) + 1e-12);
            Ok(CaseDParams {
                x_star: None,
                nu_star,
                gamma: vec![gamma_edge],
                variant,
            })
        }
    }
}

/// Stationary post-processing bias `ν t / (1 - ν √(1-t²))` for overlap `t`,
/// clamped to `[0, 1]`.
pub fn stationary_gamma(nu: f64, t: f64) -> f64 {
    let g = nu * t / (1.0 - nu * (1.0 - t * t).max(0.0).sqrt());
    g.clamp(0.0, 1.0)
}

/// Weak-measurement strength maximizing the guessed-setting validity bound
/// at overlap `mu`: `ν = μ / (1 + √(1-μ²))`.
pub fn weak_strength_for_overlap(mu: f64) -> f64 {
    mu / (1.0 + (1.0 - mu * mu).max(0.0).sqrt())
}

fn check_nu_t(nu: f64, t: f64) -> Result<(), BoundsError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(BoundsError::ParamOutOfRange {
            name: "nu",
            value: nu,
            domain: "[0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(BoundsError::ParamOutOfRange {
            name: "t",
            value: t,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// Validity bound of the guessed setting under a weak measurement of
/// strength `nu` with axis overlap `t`: `(1 - ν²) / [2 (1 - ν t)]`.
pub fn guess_validity_bound(nu: f64, t: f64) -> Result<f64, BoundsError> {
    check_nu_t(nu, t)?;
    Ok((1.0 - nu * nu) / (2.0 * (1.0 - nu * t)))
}

/// Validity bound of an unguessed setting after optimizing the classical
/// post-processing bias:
///
/// `1 - ν √(1-t²)` while `ν (t + √(1-t²)) <= 1`, and
/// `(1 - ν²) / [2 (1 - ν t)]` beyond; both branches agree at the
/// boundary, which is assigned to the first branch.
pub fn reversal_validity_bound(nu: f64, t: f64) -> Result<f64, BoundsError> {
    check_nu_t(nu, t)?;
    let root = (1.0 - t * t).max(0.0).sqrt();
    if nu * (t + root) <= 1.0 {
        Ok(1.0 - nu * root)
    } else {
        Ok((1.0 - nu * nu) / (2.0 * (1.0 - nu * t)))
    }
}

/// Validity bound of an unguessed setting at a fixed post-processing bias
/// `gamma`: `(1-ν²) / [A + √(A² - (1-ν²)(1-γ²))]` with `A = 1 - ν γ t`.
/// [`reversal_validity_bound`] is the maximum of this over `gamma`.
pub fn reversal_objective(nu: f64, t: f64, gamma: f64) -> f64 {
    let a = 1.0 - nu * gamma * t;
    let disc = (a * a - (1.0 - nu * nu) * (1.0 - gamma * gamma)).max(0.0);
    (1.0 - nu * nu) / (a + disc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generic_bounds_table() {
        assert_eq!(generic_bound(GCase::A, 3, 2).unwrap(), 1.0 / 3.0);
        assert_eq!(generic_bound(GCase::B, 5, 7).unwrap(), 0.5);
        assert_eq!(generic_bound(GCase::C, 2, 3).unwrap(), 0.5);
        assert_eq!(generic_bound(GCase::C, 4, 3).unwrap(), 1.0 / 3.0);
        assert!((generic_bound(GCase::D, 5, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(generic_bound(GCase::A, 0, 2).is_err());
    }

    #[test]
    fn cone_two_directions() {
        let r = double_cone_angle(&[BlochVec::Z, BlochVec::X]).unwrap();
        assert!((r.theta - PI / 2.0).abs() < 1e-12);
        // bisector of z and x
        let expect = BlochVec::new(1.0, 0.0, 1.0).normalized().unwrap();
        assert!((r.axis.dot(&expect) - 1.0).abs() < 1e-12);
        assert!(r
            .per_axis_angles
            .iter()
            .all(|&a| (a - PI / 4.0).abs() < 1e-12));

        let r = double_cone_angle(&[BlochVec::Z, BlochVec::Z]).unwrap();
        assert!(r.theta.abs() < 1e-12);
        // antipodal identification
        let r = double_cone_angle(&[BlochVec::Z, BlochVec::Z.scale(-1.0)]).unwrap();
        assert!(r.theta.abs() < 1e-12);
    }

    #[test]
    fn cone_xyz_matches_text_value() {
        let r = double_cone_angle(&[BlochVec::X, BlochVec::Y, BlochVec::Z]).unwrap();
        let expect = 2.0 * (1.0 / 3.0_f64.sqrt()).acos();
        assert!(
            (r.theta - expect).abs() < 1e-6,
            "theta = {}, expected {}",
            r.theta,
            expect
        );
        // optimal axis is (1,1,1)/√3 up to sign pattern; all overlaps equal
        for &a in &r.per_axis_angles {
            assert!((a - r.theta / 2.0).abs() < 1e-5);
        }
    }

    #[test]
    fn cone_numeric_matches_closed_form_on_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let r1 = crate::matqm::random_unit_bloch(&mut rng);
            let r2 = crate::matqm::random_unit_bloch(&mut rng);
            let closed = double_cone_angle(&[r1, r2]).unwrap();
            let numeric = minimax_axis(&[r1, r2]);
            let theta_numeric = 2.0 * half_aperture(&numeric, &[r1, r2]);
            assert!(
                (closed.theta - theta_numeric).abs() < 1e-7,
                "closed {} vs numeric {}",
                closed.theta,
                theta_numeric
            );
        }
    }

    #[test]
    fn cone_rejects_bad_input() {
        assert!(double_cone_angle(&[]).is_err());
        assert!(double_cone_angle(&[BlochVec::new(0.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn axis_angle_for_key_setting() {
        assert!((case_d_axis_angle(&[BlochVec::Z, BlochVec::X]).unwrap() - PI / 2.0).abs() < 1e-12);
        let t0 = 0.3;
        let r2 = BlochVec::xz_plane(t0);
        assert!((case_d_axis_angle(&[BlochVec::Z, r2]).unwrap() - t0).abs() < 1e-12);
        assert!(case_d_axis_angle(&[BlochVec::Z, BlochVec::Z.scale(-1.0)]).unwrap() < 1e-9);
        assert!(case_d_axis_angle(&[BlochVec::Z]).unwrap() == 0.0);
    }

    #[test]
    fn qubit_case_c_values() {
        assert!((qubit_bound_case_c(PI / 2.0).unwrap() - (2.0 - 2.0_f64.sqrt())).abs() < 1e-12);
        assert_eq!(qubit_bound_case_c(0.0).unwrap(), 1.0);
        let theta = 2.0 * (1.0 / 3.0_f64.sqrt()).acos();
        let expect = 1.0 / (1.0 + (1.0 / 3.0_f64.sqrt()).acos().sin());
        assert!((qubit_bound_case_c(theta).unwrap() - expect).abs() < 1e-12);
        assert!(qubit_bound_case_c(-0.1).is_err());
        assert!(qubit_bound_case_c(PI + 0.1).is_err());
    }

    #[test]
    fn qubit_case_c_strictly_better_than_half_and_monotone() {
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let theta = PI * i as f64 / 100.0;
            let b = qubit_bound_case_c(theta).unwrap();
            assert!(
                b > 0.5 || (theta - PI).abs() < 1e-12,
                "bound {b} at theta {theta}"
            );
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn qubit_case_d_values_and_gap() {
        assert!(
            (qubit_bound_case_d(PI / 2.0, CaseDVariant::N2).unwrap() - 2.0 / 3.0).abs() < 1e-12
        );
        assert!(
            (qubit_bound_case_d(PI / 2.0, CaseDVariant::General).unwrap() - 2.0 / 3.0).abs()
                < 1e-12
        );
        assert!((qubit_bound_case_d(PI / 6.0, CaseDVariant::N2).unwrap() - 0.8).abs() < 1e-12);
        let mut prev_n2 = f64::INFINITY;
        let mut prev_gen = f64::INFINITY;
        for i in 0..=50 {
            let theta = PI / 2.0 * i as f64 / 50.0;
            let n2 = qubit_bound_case_d(theta, CaseDVariant::N2).unwrap();
            let general = qubit_bound_case_d(theta, CaseDVariant::General).unwrap();
            assert!((n2 - general - case_d_bound_gap(theta)).abs() < 1e-12);
            assert!(case_d_bound_gap(theta) >= 0.0);
            assert!(n2 <= prev_n2 + 1e-15 && general <= prev_gen + 1e-15);
            prev_n2 = n2;
            prev_gen = general;
        }
    }

    #[test]
    fn case_d_params_endpoints() {
        // θ = π/2: x* = 0, ν* = 1/3, γ* = 0
        let p = case_d_params(PI / 2.0, CaseDVariant::N2).unwrap();
        assert!(p.x_star.unwrap().abs() < 1e-12);
        assert!((p.nu_star - 1.0 / 3.0).abs() < 1e-12);
        assert!(p.gamma[0].abs() < 1e-12);
        // θ = 0: x* = 0, ν* = 1 boundary
        let p = case_d_params(0.0, CaseDVariant::N2).unwrap();
        assert!(p.x_star.unwrap().abs() < 1e-12);
        assert!((p.nu_star - 1.0).abs() < 1e-12);
        // general at π/2: ν* = 1/3
        let p = case_d_params(PI / 2.0, CaseDVariant::General).unwrap();
        assert!((p.nu_star - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn case_d_params_saturate_both_constraints() {
        // at the optimum both active constraints equal the closed-form
        // bound; θ = 0 is excluded since ν* = 1 sits on the boundary of the
        // validity-bound domain
        for i in 1..=20 {
            let theta = PI / 2.0 * i as f64 / 20.0;
            let bound = qubit_bound_case_d(theta, CaseDVariant::N2).unwrap();
            let p = case_d_params(theta, CaseDVariant::N2).unwrap();
            let x = p.x_star.unwrap();
            let f = guess_validity_bound(p.nu_star, x.cos()).unwrap();
            let g_lin = 1.0 - p.nu_star * (theta - x).sin();
            assert!(
                (f - bound).abs() < 1e-9,
                "guessed-setting constraint off at {theta}"
            );
            assert!(
                (g_lin - bound).abs() < 1e-9,
                "reversal constraint off at {theta}"
            );

            let bound_gen = qubit_bound_case_d(theta, CaseDVariant::General).unwrap();
            let p = case_d_params(theta, CaseDVariant::General).unwrap();
            let f = guess_validity_bound(p.nu_star, 1.0).unwrap();
            let g = reversal_validity_bound(p.nu_star, theta.cos()).unwrap();
            assert!((f - bound_gen).abs() < 1e-12);
            assert!((g - bound_gen).abs() < 1e-12);
        }
    }

    #[test]
    fn guess_validity_bound_basics() {
        for t in [0.0, 0.3, 0.9, 1.0] {
            assert!((guess_validity_bound(0.0, t).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!(guess_validity_bound(1.0, 0.5).is_err());
        assert!(guess_validity_bound(0.5, 1.5).is_err());
    }

    #[test]
    fn reversal_bound_at_t_one_and_branch_point() {
        // t = 1: branch condition ν·1 <= 1 always holds, first branch gives 1
        for nu in [0.0, 0.3, 0.7, 0.99] {
            assert_eq!(reversal_validity_bound(nu, 1.0).unwrap(), 1.0);
        }
        // explicit value from the first branch
        let g = reversal_validity_bound(0.5, (PI / 4.0).cos()).unwrap();
        assert!((g - (1.0 - 0.5 * (PI / 4.0).sin())).abs() < 1e-12);
        // continuity across the branch point ν (t + √(1-t²)) = 1
        for t in [0.2_f64, 0.5, 0.8] {
            let nu = 1.0 / (t + (1.0 - t * t).sqrt());
            if nu < 1.0 {
                let lo = reversal_validity_bound(nu - 1e-9, t).unwrap();
                let hi = reversal_validity_bound(nu + 1e-9, t).unwrap();
                assert!((lo - hi).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn reversal_bound_matches_brute_force() {
        // grid of step 1e-5 plus local ternary refinement
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for _ in 0..100 {
            let nu: f64 = rng.gen_range(0.0..0.999);
            let t: f64 = rng.gen_range(0.0..=1.0);
            let closed = reversal_validity_bound(nu, t).unwrap();
            let mut best = f64::NEG_INFINITY;
            let mut best_g = 0.0;
            let steps = 100_000;
            for i in 0..=steps {
                let g = i as f64 / steps as f64;
                let v = reversal_objective(nu, t, g);
                if v > best {
                    best = v;
                    best_g = g;
                }
            }
            let (mut lo, mut hi) = ((best_g - 2e-5).max(0.0), (best_g + 2e-5).min(1.0));
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if reversal_objective(nu, t, m1) < reversal_objective(nu, t, m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            let refined = reversal_objective(nu, t, (lo + hi) / 2.0).max(best);
            assert!(
                (closed - refined).abs() < 1e-7,
                "closed {closed} vs brute {refined} at nu={nu}, t={t}"
            );
        }
    }

    #[test]
    fn stationary_gamma_within_reach() {
        // admissibility region of the general variant: γ* <= 1/(1+sinθ)
        for i in 0..=20 {
            let theta = PI / 2.0 * i as f64 / 20.0;
            let nu = 1.0 / (1.0 + 2.0 * theta.sin());
            for j in 0..=10 {
                let t_y = (theta.cos() + (1.0 - theta.cos()) * j as f64 / 10.0).min(1.0);
                let g = stationary_gamma(nu, t_y);
                assert!(g <= 1.0 / (1.0 + theta.sin()) + 1e-12);
            }
        }
    }
}
