//! Qubit weak-measurement strategies for the partial-outcome and partial
//! input & outcome cases.
//!
//! Both strategies measure weakly along an axis `m` with strength `ν`
//! (effects `(I ± ν m·σ)/2`) and undo the back-action with the analytic
//! inverse of the Kraus operators, taken in the `{P_{+m}, P_{-m}}`
//! eigenbasis. At `ν = 1` the inverse degenerates to a pseudo-inverse on
//! the measured ray, which is valid exactly when the conjugated effects are
//! supported there (aligned axes); this is checked explicitly.

use std::collections::BTreeMap;

use crate::bounds::{
    case_d_axis_angle, case_d_params, double_cone_angle, guess_validity_bound,
    reversal_validity_bound, stationary_gamma, weak_strength_for_overlap, CaseDVariant,
};
use crate::matqm::{bloch_projector, BlochVec, HermMat};
use crate::povm::{qubit_assembly, Outcome};

use super::{EffectSet, Instrument, Strategy, StrategyError};

/// Sign convention: instrument outcome index 0 is `c = +1`, index 1 is
/// `c = -1`; assembly outcome `1` is the `+r_y` projector, `2` the `-r_y`
/// projector.
fn c_sign(c: usize) -> f64 {
    if c == 0 {
        1.0
    } else {
        -1.0
    }
}

fn outcome_of_sign(s: f64) -> Outcome {
    if s >= 0.0 {
        Outcome::Click(1)
    } else {
        Outcome::Click(2)
    }
}

fn sign_of_outcome(b: Outcome) -> f64 {
    match b {
        Outcome::Click(1) => 1.0,
        Outcome::Click(2) => -1.0,
        _ => unreachable!("qubit strategies use outcomes 1 and 2"),
    }
}

/// `sgn` with the `sgn(0) = +1` convention used by the guess function.
fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

struct WeakMeasurement {
    kraus: [HermMat; 2],
    /// Analytic (pseudo-)inverses in the `{P_{±m}}` eigenbasis.
    inv: [HermMat; 2],
    proj: [HermMat; 2],
    nu: f64,
}

fn weak_measurement(m: &BlochVec, nu: f64) -> Result<WeakMeasurement, StrategyError> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(StrategyError::ValidityViolated {
            violations: vec![("nu in [0, 1]".into(), nu)],
        });
    }
    let p_plus = bloch_projector(m, 1)?;
    let p_minus = bloch_projector(m, -1)?;
    let strong = ((1.0 + nu) / 2.0).sqrt();
    let weak = ((1.0 - nu) / 2.0).sqrt();
    let k_plus = p_plus.scale(strong).add(&p_minus.scale(weak));
    let k_minus = p_minus.scale(strong).add(&p_plus.scale(weak));
    // inverse eigenvalues; at ν = 1 the weak branch is the kernel
    let inv_strong = 1.0 / strong;
    let inv_weak = if nu < 1.0 { 1.0 / weak } else { 0.0 };
    let i_plus = p_plus.scale(inv_strong).add(&p_minus.scale(inv_weak));
    let i_minus = p_minus.scale(inv_strong).add(&p_plus.scale(inv_weak));
    Ok(WeakMeasurement {
        kraus: [k_plus, k_minus],
        inv: [i_plus, i_minus],
        proj: [p_plus, p_minus],
        nu,
    })
}

impl WeakMeasurement {
    /// `K_c^{-1} B K_c^{-1}`, with a support check when the inverse is a
    /// pseudo-inverse (`ν = 1`).
    fn conjugate_inv(&self, c: usize, b: &HermMat) -> Result<HermMat, StrategyError> {
        if self.nu >= 1.0 {
            let pi = &self.proj[c];
            let restricted = b.sandwich(pi.as_matrix());
            let dev = restricted.max_abs_diff(b);
            if dev > 1e-10 {
                return Err(StrategyError::SupportViolation(dev));
            }
        }
        Ok(b.sandwich(self.inv[c].as_matrix()))
    }
}

/// Optimal weak-measurement parameters for guessing the conclusive
/// outcomes of every setting: the double-cone axis, the matching strength,
/// and the efficiency bound `1/(1 + sin(θ/2))`.
pub fn qubit_case_c_optimal_params(
    directions: &[BlochVec],
) -> Result<(BlochVec, f64, f64), StrategyError> {
    let cone = double_cone_angle(directions).map_err(|e| StrategyError::ValidityViolated {
        violations: vec![(e.to_string(), f64::NAN)],
    })?;
    let mu = (cone.theta / 2.0).cos();
    let nu = weak_strength_for_overlap(mu);
    let bound = 1.0 / (1.0 + (cone.theta / 2.0).sin());
    Ok((cone.axis, nu, bound))
}

/// Weak-measurement strategy guessing the conclusive outcomes of every
/// setting: valid whenever `η <= (1-ν²)/(2(1-ν|m·r_y|))` for each `y`.
pub fn strat_qubit_case_c(
    directions: &[BlochVec],
    m: &BlochVec,
    nu: f64,
    eta: f64,
) -> Result<Strategy, StrategyError> {
    let a_ideal = qubit_assembly(directions)?;
    let wm = weak_measurement(m, nu)?;

    // per-setting validity of M_star <= I
    let mut violations = Vec::new();
    for (y, r) in directions.iter().enumerate() {
        let t = m.dot(r).abs().min(1.0);
        let bound = if nu < 1.0 {
            guess_validity_bound(nu, t).map_err(|e| StrategyError::ValidityViolated {
                violations: vec![(e.to_string(), f64::NAN)],
            })?
        } else if t >= 1.0 - 1e-12 {
            1.0
        } else {
            0.0 // a pseudo-inverse cannot host a misaligned effect
        };
        if eta > bound + 1e-9 {
            violations.push((format!("setting {y}: eta <= (1-ν²)/(2(1-ν t))"), bound));
        }
    }
    if !violations.is_empty() {
        return Err(StrategyError::ValidityViolated { violations });
    }

    let instrument = Instrument::new(vec![
        vec![wm.kraus[0].as_matrix().clone()],
        vec![wm.kraus[1].as_matrix().clone()],
    ])?;
    let labels = vec![Outcome::Click(1), Outcome::Click(2), Outcome::NoClick];
    let mut conditionals = Vec::with_capacity(directions.len());
    let mut response = Vec::with_capacity(directions.len());
    let mut guess = Vec::with_capacity(directions.len());
    for (y, r) in directions.iter().enumerate() {
        let mut cond_row = Vec::with_capacity(2);
        let mut resp_row = Vec::with_capacity(2);
        let mut guess_row = Vec::with_capacity(2);
        for c in 0..2 {
            let g_sign = c_sign(c) * sgn(m.dot(r));
            let g_outcome = outcome_of_sign(g_sign);
            let honest = a_ideal.povm(y).effect(g_outcome).expect("qubit label");
            let star = wm.conjugate_inv(c, honest)?.scale(eta);
            let effects: Vec<HermMat> = labels
                .iter()
                .map(|&b| {
                    if b == g_outcome {
                        star.clone()
                    } else if b == Outcome::NoClick {
                        HermMat::identity(2).sub(&star)
                    } else {
                        HermMat::zeros(2)
                    }
                })
                .collect();
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            resp_row.push(BTreeMap::from([(g_outcome, 1.0)]));
            guess_row.push(Some(g_outcome));
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    Strategy::new(instrument, conditionals, response, guess)
}

/// Weak-measurement strategy guessing only the first setting's conclusive
/// outcomes, with biased classical post-processing `q = (1 + b·g·γ_y)/2`
/// restoring the statistics of the untested settings.
pub fn strat_qubit_case_d(
    directions: &[BlochVec],
    variant: CaseDVariant,
    eta: f64,
) -> Result<Strategy, StrategyError> {
    let a_ideal = qubit_assembly(directions)?;
    let n = directions.len();
    let r1 = directions[0];

    let (m, nu, gamma): (BlochVec, f64, Vec<f64>) = match variant {
        CaseDVariant::N2 => {
            if n != 2 {
                return Err(StrategyError::ShapeMismatch(format!(
                    "two-measurement variant needs exactly 2 directions, got {n}"
                )));
            }
            let theta = r1.dot(&directions[1]).abs().min(1.0).acos();
            let params = case_d_params(theta, CaseDVariant::N2).map_err(|e| {
                StrategyError::ValidityViolated {
                    violations: vec![(e.to_string(), f64::NAN)],
                }
            })?;
            let x = params
                .x_star
                .expect("two-measurement variant fixes the axis angle");
            // axis between r_1 and the folded r_2, at angle x* from r_1
            let folded = directions[1].scale(sgn(r1.dot(&directions[1])));
            let perp = folded.add(&r1.scale(-folded.dot(&r1)));
            let m = if perp.norm() < 1e-12 {
                r1
            } else {
                let e = perp.normalized().expect("nonzero perpendicular component");
                r1.scale(x.cos())
                    .add(&e.scale(x.sin()))
                    .normalized()
                    .expect("unit")
            };
            (
                m,
                params.nu_star,
                vec![params.gamma[0]; n.saturating_sub(1)],
            )
        }
        CaseDVariant::General => {
            let theta =
                case_d_axis_angle(directions).map_err(|e| StrategyError::ValidityViolated {
                    violations: vec![(e.to_string(), f64::NAN)],
                })?;
            if theta > std::f64::consts::FRAC_PI_2 + 1e-12 {
                return Err(StrategyError::ValidityViolated {
                    violations: vec![("axis angles within [0, π/2] of r_1".into(), theta)],
                });
            }
            let params = case_d_params(theta, CaseDVariant::General).map_err(|e| {
                StrategyError::ValidityViolated {
                    violations: vec![(e.to_string(), f64::NAN)],
                }
            })?;
            let gamma = directions[1..]
                .iter()
                .map(|r| stationary_gamma(params.nu_star, r1.dot(r).abs().min(1.0)))
                .collect();
            (r1, params.nu_star, gamma)
        }
    };

    // validity: the guessed setting against the weak-measurement strength,
    // and every untested setting against its reversal bound
    let mut violations = Vec::new();
    let t1 = m.dot(&r1).abs().min(1.0);
    let f_bound = if nu < 1.0 {
        guess_validity_bound(nu, t1).expect("validated parameters")
    } else if t1 >= 1.0 - 1e-12 {
        1.0
    } else {
        0.0
    };
    if eta > f_bound + 1e-9 {
        violations.push(("guessed setting: eta <= (1-ν²)/(2(1-ν t1))".into(), f_bound));
    }
    for (i, r) in directions[1..].iter().enumerate() {
        let t = m.dot(r).abs().min(1.0);
        let g_bound = if nu < 1.0 {
            reversal_validity_bound(nu, t).expect("validated parameters")
        } else if t >= 1.0 - 1e-12 {
            1.0
        } else {
            0.0
        };
        if eta > g_bound + 1e-9 {
            violations.push((
                format!("setting {}: eta <= max_γ reversal bound", i + 1),
                g_bound,
            ));
        }
    }
    if !violations.is_empty() {
        return Err(StrategyError::ValidityViolated { violations });
    }

    let wm = weak_measurement(&m, nu)?;
    let instrument = Instrument::new(vec![
        vec![wm.kraus[0].as_matrix().clone()],
        vec![wm.kraus[1].as_matrix().clone()],
    ])?;
    let labels = vec![Outcome::Click(1), Outcome::Click(2), Outcome::NoClick];
    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for (y, r) in directions.iter().enumerate() {
        let mut cond_row = Vec::with_capacity(2);
        let mut resp_row = Vec::with_capacity(2);
        let mut guess_row = Vec::with_capacity(2);
        for c in 0..2 {
            let g_sign = c_sign(c) * sgn(m.dot(r));
            let g_outcome = outcome_of_sign(g_sign);
            if y == 0 {
                let honest = a_ideal.povm(0).effect(g_outcome).expect("qubit label");
                let star = wm.conjugate_inv(c, honest)?.scale(eta);
                let effects: Vec<HermMat> = labels
                    .iter()
                    .map(|&b| {
                        if b == g_outcome {
                            star.clone()
                        } else if b == Outcome::NoClick {
                            HermMat::identity(2).sub(&star)
                        } else {
                            HermMat::zeros(2)
                        }
                    })
                    .collect();
                cond_row.push(EffectSet::new(labels.clone(), effects)?);
                resp_row.push(BTreeMap::from([(g_outcome, 1.0)]));
                guess_row.push(Some(g_outcome));
            } else {
                let gamma_y = gamma[y - 1];
                let mut sum = HermMat::zeros(2);
                let mut effects: Vec<HermMat> = Vec::with_capacity(3);
                for &b in &labels {
                    if b == Outcome::NoClick {
                        effects.push(HermMat::zeros(2)); // placeholder
                        continue;
                    }
                    let q = 0.5 * (1.0 + sign_of_outcome(b) * g_sign * gamma_y);
                    // a zero post-processing weight never touches the
                    // (possibly singular) inverse
                    let block = if q.abs() < 1e-15 {
                        HermMat::zeros(2)
                    } else {
                        let honest = a_ideal.povm(y).effect(b).expect("qubit label");
                        wm.conjugate_inv(c, honest)?.scale(eta * q)
                    };
                    sum = sum.add(&block);
                    effects.push(block);
                }
                effects[2] = HermMat::identity(2).sub(&sum);
                cond_row.push(EffectSet::new(labels.clone(), effects)?);
                resp_row.push(BTreeMap::new());
                guess_row.push(None);
            }
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    Strategy::new(instrument, conditionals, response, guess)
}
