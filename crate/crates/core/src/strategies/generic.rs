//! Measurement-independent strategies: the four generic constructions with
//! thresholds `1/n`, `1/2`, `1/k`, and `k/(2k-1)`.
//!
//! Constructors defined at a boundary efficiency are extended below it by
//! classically mixing with the all-no-click strategy, which realizes any
//! `η` up to the bound while staying verifiable as operator identities.

use std::collections::BTreeMap;

use crate::matqm::{embedding_isometry, herm_sqrt, naimark_dilate, CplxMat, HermMat};
use crate::povm::{Assembly, Outcome};

use super::{EffectSet, Instrument, Strategy, StrategyError};

fn lossy_labels(a: &Assembly, y: usize) -> Vec<Outcome> {
    let mut labels = a.povm(y).labels().to_vec();
    labels.push(Outcome::NoClick);
    labels
}

fn delta_response(guess: Outcome) -> BTreeMap<Outcome, f64> {
    BTreeMap::from([(guess, 1.0)])
}

/// The strategy that outputs `∅` on every setting: identity instrument with
/// a single classical outcome. `guesses[y] = None` marks settings with an
/// empty guessable subset.
fn all_no_click(a_ideal: &Assembly, guesses: &[Option<Outcome>]) -> Strategy {
    let d = a_ideal.dim();
    let instrument =
        Instrument::new(vec![vec![CplxMat::identity(d, d)]]).expect("identity instrument");
    let conditionals: Vec<Vec<EffectSet>> = (0..a_ideal.n_settings())
        .map(|y| {
            let labels = lossy_labels(a_ideal, y);
            let effects = labels
                .iter()
                .map(|&b| {
                    if b == Outcome::NoClick {
                        HermMat::identity(d)
                    } else {
                        HermMat::zeros(d)
                    }
                })
                .collect();
            vec![EffectSet::new(labels, effects).expect("valid effect set")]
        })
        .collect();
    let response = guesses
        .iter()
        .map(|g| vec![g.map(delta_response).unwrap_or_default()])
        .collect();
    let guess = guesses.iter().map(|g| vec![*g]).collect();
    Strategy::new(instrument, conditionals, response, guess).expect("well-formed")
}

/// Classical mixture `w·a + (1-w)·b` of two strategies on the same spaces:
/// instrument outcomes are concatenated with `√w`-scaled Kraus operators.
fn mix(sa: Strategy, w: f64, sb: Strategy) -> Result<Strategy, StrategyError> {
    if sa.instrument.in_dim() != sb.instrument.in_dim()
        || sa.instrument.out_dim() != sb.instrument.out_dim()
        || sa.n_settings() != sb.n_settings()
    {
        return Err(StrategyError::ShapeMismatch(
            "mixture components live on different spaces".into(),
        ));
    }
    let scale_kraus = |s: &Strategy, weight: f64| -> Vec<Vec<CplxMat>> {
        (0..s.instrument.n_outcomes())
            .map(|c| {
                s.instrument
                    .kraus(c)
                    .iter()
                    .map(|k| k.scale(weight.sqrt()))
                    .collect()
            })
            .collect()
    };
    let mut kraus = scale_kraus(&sa, w);
    kraus.extend(scale_kraus(&sb, 1.0 - w));
    let instrument = Instrument::new(kraus)?;

    let n = sa.n_settings();
    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let mut cond_row = sa.conditionals[y].clone();
        cond_row.extend(sb.conditionals[y].iter().cloned());
        conditionals.push(cond_row);
        let mut resp_row = sa.response[y].clone();
        resp_row.extend(sb.response[y].iter().cloned());
        response.push(resp_row);
        let mut guess_row = sa.guess[y].clone();
        guess_row.extend(sb.guess[y].iter().cloned());
        guess.push(guess_row);
    }
    Strategy::new(instrument, conditionals, response, guess)
}

fn check_bound(eta: f64, bound: f64) -> Result<(), StrategyError> {
    if !(0.0..=1.0).contains(&eta) || eta > bound + 1e-12 {
        return Err(StrategyError::BoundViolated { eta, bound });
    }
    Ok(())
}

/// Full joint measurability at `η <= 1/n`: the instrument guesses the
/// setting uniformly, measures it, and forwards `(setting, outcome)`; the
/// device clicks only when the guess matched.
pub fn strat_full_jm(a_ideal: &Assembly, eta: f64) -> Result<Strategy, StrategyError> {
    let n = a_ideal.n_settings();
    let bound = 1.0 / n as f64;
    check_bound(eta, bound)?;
    let d = a_ideal.dim();

    // instrument outcome (y', b') with Kraus √(B_{b'|y'}/n)
    let mut c_meta: Vec<(usize, Outcome)> = Vec::new();
    let mut kraus: Vec<Vec<CplxMat>> = Vec::new();
    for yp in 0..n {
        for &bp in a_ideal.povm(yp).labels() {
            let root = herm_sqrt(&a_ideal.povm(yp).effect(bp).unwrap().scale(bound))?;
            c_meta.push((yp, bp));
            kraus.push(vec![root.into_matrix()]);
        }
    }
    let instrument = Instrument::new(kraus)?;

    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let labels = lossy_labels(a_ideal, y);
        let mut cond_row = Vec::with_capacity(c_meta.len());
        let mut resp_row = Vec::with_capacity(c_meta.len());
        let mut guess_row = Vec::with_capacity(c_meta.len());
        for &(yp, bp) in &c_meta {
            let effects = labels
                .iter()
                .map(|&b| {
                    let clicks = if y == yp {
                        b == bp
                    } else {
                        b == Outcome::NoClick
                    };
                    if clicks {
                        HermMat::identity(d)
                    } else {
                        HermMat::zeros(d)
                    }
                })
                .collect();
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            let g = if y == yp { bp } else { Outcome::NoClick };
            resp_row.push(delta_response(g));
            guess_row.push(Some(g));
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    let at_bound = Strategy::new(instrument, conditionals, response, guess)?;
    if eta >= bound - 1e-12 {
        return Ok(at_bound);
    }
    let guesses: Vec<Option<Outcome>> = (0..n).map(|_| Some(Outcome::NoClick)).collect();
    mix(at_bound, eta / bound, all_no_click(a_ideal, &guesses))
}

/// Partial-input joint measurability at `η <= 1/2`: with probability 1/2
/// the instrument measures the first setting and forwards the outcome, with
/// probability 1/2 it forwards the state untouched; the device answers
/// honestly only in the matching branch.
pub fn strat_partial_input(a_ideal: &Assembly, eta: f64) -> Result<Strategy, StrategyError> {
    let bound = 0.5;
    check_bound(eta, bound)?;
    let d = a_ideal.dim();
    let n = a_ideal.n_settings();
    let first = a_ideal.povm(0);

    // instrument outcomes: the conclusive labels of the first measurement,
    // then ∅ for the pass-through branch
    let mut c_labels: Vec<Outcome> = first.labels().to_vec();
    c_labels.push(Outcome::NoClick);
    let kraus: Vec<Vec<CplxMat>> = c_labels
        .iter()
        .map(|&c| {
            let op = match c {
                Outcome::NoClick => HermMat::identity(d),
                _ => herm_sqrt(first.effect(c).expect("label of the first POVM"))?,
            };
            Ok(vec![op.scale(0.5_f64.sqrt()).into_matrix()])
        })
        .collect::<Result<_, StrategyError>>()?;
    let instrument = Instrument::new(kraus)?;

    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let labels = lossy_labels(a_ideal, y);
        let mut cond_row = Vec::new();
        let mut resp_row = Vec::new();
        let mut guess_row = Vec::new();
        for &c in &c_labels {
            let effects: Vec<HermMat> = labels
                .iter()
                .map(|&b| {
                    if y == 0 {
                        // forward the instrument outcome verbatim
                        if b == c {
                            HermMat::identity(d)
                        } else {
                            HermMat::zeros(d)
                        }
                    } else if c == Outcome::NoClick {
                        // untouched state: honest measurement, never ∅
                        match b {
                            Outcome::NoClick => HermMat::zeros(d),
                            _ => a_ideal.povm(y).effect(b).expect("ideal label").clone(),
                        }
                    } else if b == Outcome::NoClick {
                        HermMat::identity(d)
                    } else {
                        HermMat::zeros(d)
                    }
                })
                .collect();
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            if y == 0 {
                resp_row.push(delta_response(c));
                guess_row.push(Some(c));
            } else {
                resp_row.push(BTreeMap::new());
                guess_row.push(None);
            }
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    let at_bound = Strategy::new(instrument, conditionals, response, guess)?;
    if eta >= bound - 1e-12 {
        return Ok(at_bound);
    }
    let mut guesses = vec![None; n];
    guesses[0] = Some(Outcome::NoClick);
    mix(at_bound, eta / bound, all_no_click(a_ideal, &guesses))
}

fn uniform_conclusive_labels(a: &Assembly) -> Result<Vec<Outcome>, StrategyError> {
    let labels = a.povm(0).conclusive_labels();
    for y in 1..a.n_settings() {
        if a.povm(y).conclusive_labels() != labels {
            return Err(StrategyError::NonUniformLabels);
        }
    }
    Ok(labels)
}

/// Partial-outcome joint measurability at `η <= 1/k`: the instrument
/// guesses the outcome uniformly; the device measures honestly and clicks
/// only when the result matches the guess.
pub fn strat_partial_outcome_generic(
    a_ideal: &Assembly,
    eta: f64,
) -> Result<Strategy, StrategyError> {
    let labels_c = uniform_conclusive_labels(a_ideal)?;
    let k = labels_c.len();
    let bound = 1.0 / k as f64;
    check_bound(eta, bound)?;
    let d = a_ideal.dim();
    let n = a_ideal.n_settings();

    let kraus: Vec<Vec<CplxMat>> = labels_c
        .iter()
        .map(|_| vec![CplxMat::identity(d, d).scale(bound.sqrt())])
        .collect();
    let instrument = Instrument::new(kraus)?;

    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let labels = lossy_labels(a_ideal, y);
        let mut cond_row = Vec::new();
        let mut resp_row = Vec::new();
        let mut guess_row = Vec::new();
        for &c in &labels_c {
            let honest = a_ideal.povm(y).effect(c).expect("uniform labels").clone();
            let effects: Vec<HermMat> = labels
                .iter()
                .map(|&b| {
                    if b == c {
                        honest.clone()
                    } else if b == Outcome::NoClick {
                        HermMat::identity(d).sub(&honest)
                    } else {
                        HermMat::zeros(d)
                    }
                })
                .collect();
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            resp_row.push(delta_response(c));
            guess_row.push(Some(c));
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    let at_bound = Strategy::new(instrument, conditionals, response, guess)?;
    if eta >= bound - 1e-12 {
        return Ok(at_bound);
    }
    let guesses: Vec<Option<Outcome>> = (0..n).map(|_| Some(labels_c[0])).collect();
    mix(at_bound, eta / bound, all_no_click(a_ideal, &guesses))
}

/// Validity margins of the probabilistic reversal at `γ = η/k`: the
/// operator inequality `L†L ⪯ I` splits into `γ <= η` on the measured
/// subspace and `γ <= (1-η)/(k-1)` on its complement. Returns both margins;
/// the second one is the binding constraint, reaching zero exactly at
/// `η = k/(2k-1)`.
pub fn case_d_reversal_margins(k: usize, eta: f64) -> (f64, f64) {
    let gamma = eta / k as f64;
    (eta - gamma, (1.0 - eta) / (k as f64 - 1.0) - gamma)
}

/// Partial input & outcome joint measurability at `η <= k/(2k-1)`: a weak
/// measurement of the first setting on its dilation space, with a
/// probabilistic reversal of the disturbance for the other settings. For
/// `η <= 1/k` this reduces to outcome guessing on the first setting.
pub fn strat_case_d_generic(a_ideal: &Assembly, eta: f64) -> Result<Strategy, StrategyError> {
    let d = a_ideal.dim();
    let n = a_ideal.n_settings();
    let first_labels = a_ideal.povm(0).conclusive_labels();
    let k = first_labels.len();
    let outcome_guess_bound = 1.0 / k as f64;

    if eta <= outcome_guess_bound + 1e-12 {
        return case_d_outcome_guessing(a_ideal, eta);
    }
    let bound = k as f64 / (2.0 * k as f64 - 1.0);
    if eta > bound + 1e-12 {
        return Err(StrategyError::ReversalInvalid { eta, bound });
    }

    // weak measurement of the first setting on its dilation space
    let first_effects: Vec<HermMat> = first_labels
        .iter()
        .map(|&b| a_ideal.povm(0).effect(b).unwrap().clone())
        .collect();
    let (projectors, ext_dim) = naimark_dilate(&first_effects)?;
    let embed = embedding_isometry(d, k);
    let one_ext = HermMat::identity(ext_dim);

    let strong = eta.sqrt();
    let weak = ((1.0 - eta) / (k as f64 - 1.0)).sqrt();
    let kraus: Vec<Vec<CplxMat>> = projectors
        .iter()
        .map(|p| {
            let k_c = p.scale(strong).add(&one_ext.sub(p).scale(weak));
            vec![k_c.as_matrix() * &embed]
        })
        .collect();
    let instrument = Instrument::new(kraus)?;

    // reversal Kraus with γ = η/k, so that k γ = η reproduces the lossy
    // statistics of the untested settings
    let gamma = eta / k as f64;
    let reversal: Vec<CplxMat> = projectors
        .iter()
        .map(|p| {
            let inv_strong = (gamma / eta).sqrt();
            let inv_weak = (gamma * (k as f64 - 1.0) / (1.0 - eta)).sqrt();
            p.scale(inv_strong)
                .add(&one_ext.sub(p).scale(inv_weak))
                .into_matrix()
        })
        .collect();

    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let labels = lossy_labels(a_ideal, y);
        let mut cond_row = Vec::new();
        let mut resp_row = Vec::new();
        let mut guess_row = Vec::new();
        for (ci, &c) in first_labels.iter().enumerate() {
            let effects: Vec<HermMat> = if y == 0 {
                labels
                    .iter()
                    .map(|&b| {
                        if b == c {
                            projectors[ci].clone()
                        } else if b == Outcome::NoClick {
                            one_ext.sub(&projectors[ci])
                        } else {
                            HermMat::zeros(ext_dim)
                        }
                    })
                    .collect()
            } else {
                // probabilistic reversal followed by the honest measurement
                // lifted to the dilation space; reversal failure reports ∅
                let l = &reversal[ci];
                let mut sum = HermMat::zeros(ext_dim);
                let mut effects: Vec<HermMat> = Vec::with_capacity(labels.len());
                for &b in &labels {
                    if b == Outcome::NoClick {
                        effects.push(HermMat::zeros(ext_dim)); // placeholder
                    } else {
                        let lifted = a_ideal
                            .povm(y)
                            .effect(b)
                            .expect("ideal label")
                            .kron(&HermMat::identity(k));
                        let m = lifted.sandwich(&l.adjoint());
                        sum = sum.add(&m);
                        effects.push(m);
                    }
                }
                let idx = labels
                    .iter()
                    .position(|&b| b == Outcome::NoClick)
                    .expect("lossy labels end with ∅");
                effects[idx] = one_ext.sub(&sum);
                effects
            };
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            if y == 0 {
                resp_row.push(delta_response(c));
                guess_row.push(Some(c));
            } else {
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

/// Outcome guessing restricted to the first setting, valid for
/// `η <= 1/k_1` with arbitrary label sets on the other settings (which are
/// reproduced by uniform damping).
fn case_d_outcome_guessing(a_ideal: &Assembly, eta: f64) -> Result<Strategy, StrategyError> {
    let d = a_ideal.dim();
    let n = a_ideal.n_settings();
    let first_labels = a_ideal.povm(0).conclusive_labels();
    let k = first_labels.len();
    let bound = 1.0 / k as f64;
    check_bound(eta, bound)?;

    let kraus: Vec<Vec<CplxMat>> = first_labels
        .iter()
        .map(|_| vec![CplxMat::identity(d, d).scale(bound.sqrt())])
        .collect();
    let instrument = Instrument::new(kraus)?;

    let mut conditionals = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut guess = Vec::with_capacity(n);
    for y in 0..n {
        let labels = lossy_labels(a_ideal, y);
        let mut cond_row = Vec::new();
        let mut resp_row = Vec::new();
        let mut guess_row = Vec::new();
        for &c in &first_labels {
            let effects: Vec<HermMat> = if y == 0 {
                let honest = a_ideal.povm(0).effect(c).unwrap().clone();
                labels
                    .iter()
                    .map(|&b| {
                        if b == c {
                            honest.clone()
                        } else if b == Outcome::NoClick {
                            HermMat::identity(d).sub(&honest)
                        } else {
                            HermMat::zeros(d)
                        }
                    })
                    .collect()
            } else {
                labels
                    .iter()
                    .map(|&b| match b {
                        Outcome::NoClick => HermMat::scaled_identity(d, 1.0 - bound),
                        _ => a_ideal.povm(y).effect(b).expect("ideal label").scale(bound),
                    })
                    .collect()
            };
            cond_row.push(EffectSet::new(labels.clone(), effects)?);
            if y == 0 {
                resp_row.push(delta_response(c));
                guess_row.push(Some(c));
            } else {
                resp_row.push(BTreeMap::new());
                guess_row.push(None);
            }
        }
        conditionals.push(cond_row);
        response.push(resp_row);
        guess.push(guess_row);
    }
    let at_bound = Strategy::new(instrument, conditionals, response, guess)?;
    if eta >= bound - 1e-12 {
        return Ok(at_bound);
    }
    let mut guesses = vec![None; n];
    guesses[0] = Some(first_labels[0]);
    mix(at_bound, eta / bound, all_no_click(a_ideal, &guesses))
}
