//! Operator-identity verification of a strategy against a lossy assembly
//! and a guessable-outcome specification.

use crate::matqm::{support_projector, HermMat};
use crate::povm::{Assembly, GSpec, Outcome};

use super::{Strategy, StrategyError, VerificationReport};

/// Checks, as operator identities on the input space:
///
/// 1. consistency: `Σ_c I_c†(M_{b|y,c}) = B_{b|y}` for every `(y, b)`;
/// 2. no-signaling: `Σ_b I_c†(M_{b|y,c}) = E_c` independent of `y`;
/// 3. partial joint measurability: for guessable `b`, the effective block
///    equals `p(b|y,c)` times the star operator, with the response
///    extracted from traces;
/// 4. perfect guessing: the largest eigenvalue of
///    `Σ_c I_c†(Σ_{b ∈ G_y, b ≠ g_y(c)} M_{b|y,c})` — the worst-case
///    probability over input states of a wrong guess on a guessable
///    outcome.
///
/// All failures are report fields, never errors; errors are reserved for
/// dimension or label mismatches.
pub fn verify_strategy(
    s: &Strategy,
    a_lossy: &Assembly,
    g: &GSpec,
    tol: f64,
) -> Result<VerificationReport, StrategyError> {
    let n = a_lossy.n_settings();
    let dim = a_lossy.dim();
    if s.instrument.in_dim() != dim {
        return Err(StrategyError::ShapeMismatch(format!(
            "instrument input dim {} but assembly dim {dim}",
            s.instrument.in_dim()
        )));
    }
    if s.n_settings() != n || g.n_settings() != n {
        return Err(StrategyError::ShapeMismatch(format!(
            "{} strategy settings, {} subsets, {} assembly settings",
            s.n_settings(),
            g.n_settings(),
            n
        )));
    }
    let n_c = s.instrument.n_outcomes();
    for y in 0..n {
        let expect: std::collections::BTreeSet<Outcome> =
            a_lossy.povm(y).labels().iter().copied().collect();
        for c in 0..n_c {
            let got: std::collections::BTreeSet<Outcome> =
                s.conditionals[y][c].labels().iter().copied().collect();
            if got != expect {
                return Err(StrategyError::ShapeMismatch(format!(
                    "conditional labels at (y={y}, c={c}) do not match the assembly"
                )));
            }
        }
    }

    // effective operators E[c][y][label order of the assembly]
    let effective: Vec<Vec<Vec<HermMat>>> = (0..n_c)
        .map(|c| {
            (0..n)
                .map(|y| {
                    a_lossy
                        .povm(y)
                        .labels()
                        .iter()
                        .map(|&b| s.effective_operator(y, c, b).expect("labels checked"))
                        .collect()
                })
                .collect()
        })
        .collect();
    let parent: Vec<HermMat> = (0..n_c).map(|c| s.instrument.povm_element(c)).collect();

    let mut validity: Vec<(String, f64)> = Vec::new();
    let mut consistency = 0.0_f64;
    for y in 0..n {
        for (bi, &b) in a_lossy.povm(y).labels().iter().enumerate() {
            let mut sum = HermMat::zeros(dim);
            for c in 0..n_c {
                sum = sum.add(&effective[c][y][bi]);
            }
            consistency = consistency.max(sum.max_abs_diff(a_lossy.povm(y).effect(b).unwrap()));
        }
    }

    let mut nosignaling = 0.0_f64;
    for (c, parent_c) in parent.iter().enumerate() {
        for y in 0..n {
            let mut marg = HermMat::zeros(dim);
            for block in &effective[c][y] {
                marg = marg.add(block);
            }
            nosignaling = nosignaling.max(marg.max_abs_diff(parent_c));
        }
    }

    // partial-JM with the response extracted from traces, plus star margins
    let mut partial_jm = 0.0_f64;
    for c in 0..n_c {
        for y in 0..n {
            if g.subset(y).is_empty() {
                continue;
            }
            let mut star = parent[c].clone();
            let mut guessable: Vec<(Outcome, &HermMat)> = Vec::new();
            for (bi, &b) in a_lossy.povm(y).labels().iter().enumerate() {
                if g.subset(y).contains(&b) {
                    guessable.push((b, &effective[c][y][bi]));
                } else {
                    star = star.sub(&effective[c][y][bi]);
                }
            }
            validity.push((format!("Estar[c={c},y={y}]"), star.min_eigenvalue()));
            let tr_star = star.trace();
            if tr_star.abs() <= 1e-12 * dim as f64 {
                // a vanishing star operator forces every guessable block to
                // vanish as well
                for (_, block) in &guessable {
                    partial_jm = partial_jm.max(block.max_abs());
                }
            } else {
                for (_, block) in &guessable {
                    let p_hat = (block.trace() / tr_star).clamp(0.0, 1.0);
                    partial_jm = partial_jm.max(block.max_abs_diff(&star.scale(p_hat)));
                }
            }
        }
    }

    // guess failure: deterministic guess when present, response-weighted
    // otherwise
    let mut guess_failure = 0.0_f64;
    for y in 0..n {
        if g.subset(y).is_empty() {
            continue;
        }
        let mut failure = HermMat::zeros(dim);
        for c in 0..n_c {
            for (bi, &b) in a_lossy.povm(y).labels().iter().enumerate() {
                if !g.subset(y).contains(&b) {
                    continue;
                }
                let weight = match s.guess[y][c] {
                    Some(gc) => {
                        if b == gc {
                            0.0
                        } else {
                            1.0
                        }
                    }
                    None => 1.0 - s.response[y][c].get(&b).copied().unwrap_or(0.0),
                };
                if weight != 0.0 {
                    failure = failure.add(&effective[c][y][bi].scale(weight));
                }
            }
        }
        guess_failure = guess_failure.max(failure.max_eigenvalue().max(0.0));
    }

    // conditional completeness on the output support, and PSD margins of
    // every conditional effect
    let mut completeness = 0.0_f64;
    for c in 0..n_c {
        let gram = s.instrument.output_gram(c);
        let proj = support_projector(&gram, 1e-10)?;
        for y in 0..n {
            let mut sum = HermMat::zeros(s.instrument.out_dim());
            for (b, eff) in s.conditionals[y][c].iter() {
                validity.push((format!("M[y={y},c={c},b={b}]"), eff.min_eigenvalue()));
                sum = sum.add(eff);
            }
            let on_support = sum.sandwich(proj.as_matrix());
            completeness = completeness.max(on_support.max_abs_diff(&proj));
        }
    }

    let report = VerificationReport {
        consistency_residual: consistency,
        nosignaling_residual: nosignaling,
        partial_jm_residual: partial_jm,
        guess_failure_prob: guess_failure,
        completeness_residual: completeness,
        validity,
    };
    log::debug!(
        "verify: consistency {:.2e}, no-signaling {:.2e}, partial-JM {:.2e}, guess failure {:.2e}, completeness {:.2e}, min margin {:.2e} (tol {tol:.1e})",
        report.consistency_residual,
        report.nosignaling_residual,
        report.partial_jm_residual,
        report.guess_failure_prob,
        report.completeness_residual,
        report.min_psd_margin()
    );
    Ok(report)
}
