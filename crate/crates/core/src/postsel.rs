//! Post-selection entropy analysis for the loss-tolerant key-distribution
//! counterexample.
//!
//! The model: Alice, Bob, and Eve hold symbols `a, e ∈ {1..d}`,
//! `b ∈ {1..d, ∅}` with `P(a,b,e) = η/d` on `a = b = e` (conclusive) and
//! `(1-η)/d²` when `b = ∅`. Announcing which rounds clicked strictly
//! increases Eve's knowledge of Alice's string: `H(A|E,C) < H(A|E)` for
//! `0 < η < 1`. Nevertheless one-way key distillation toward Bob is
//! impossible (`I(B:A) - I(B:E) = 0` exactly, since the `(A,B)` and `(E,B)`
//! joint tables coincide), while direct reconciliation from Alice stays
//! possible (`I(A:B) - I(A:E) > 0`).
//!
//! The distribution table is held as exact rationals (any finite `η` is a
//! dyadic rational), which certifies the table symmetry behind the exact
//! zero; entropies are evaluated both in closed form and by direct table
//! summation.

use num::rational::BigRational;
use num::traits::ToPrimitive;
use num::{FromPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PostselError {
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),
    #[error("eta = {0} outside [0, 1]")]
    EtaOutOfRange(f64),
    #[error("alice and bob strings differ in length: {alice} vs {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("parity block size must be at least 2, got {0}")]
    BlockTooSmall(usize),
    #[error("alice bit at position {0} is not 0/1")]
    NotABit(usize),
}

/// Joint distribution of one round. Index order `(a, b, e)` with
/// `a, e ∈ 0..d` and `b ∈ 0..=d`, where `b = d` encodes `∅`.
#[derive(Debug, Clone)]
pub struct AbeDist {
    d: usize,
    eta: f64,
    table: Vec<BigRational>,
}

/// Builds the distribution: `P = η/d` on the diagonal conclusive events,
/// `(1-η)/d²` on every no-click cell, zero elsewhere.
pub fn abe_dist(d: usize, eta: f64) -> Result<AbeDist, PostselError> {
    if d < 2 {
        return Err(PostselError::AlphabetTooSmall(d));
    }
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(PostselError::EtaOutOfRange(eta));
    }
    let eta_r = BigRational::from_float(eta).expect("finite eta");
    let one = BigRational::from_integer(1.into());
    let d_r = BigRational::from_integer((d as i64).into());
    let p_click = &eta_r / &d_r;
    let p_noclick = (&one - &eta_r) / (&d_r * &d_r);
    let mut table = vec![BigRational::zero(); d * (d + 1) * d];
    for a in 0..d {
        for e in 0..d {
            // conclusive: a = b = e
            if a == e {
                table[idx(d, a, a, e)] = p_click.clone();
            }
            table[idx(d, a, d, e)] = p_noclick.clone();
        }
    }
    Ok(AbeDist { d, eta, table })
}

fn idx(d: usize, a: usize, b: usize, e: usize) -> usize {
    (a * (d + 1) + b) * d + e
}

impl AbeDist {
    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `P(a, b, e)`; `b = d` encodes the no-click symbol.
    pub fn prob(&self, a: usize, b: usize, e: usize) -> f64 {
        self.table[idx(self.d, a, b, e)]
            .to_f64()
            .expect("small rational")
    }

    pub fn prob_exact(&self, a: usize, b: usize, e: usize) -> &BigRational {
        &self.table[idx(self.d, a, b, e)]
    }

    /// Total probability mass; exactly 1 for valid parameters.
    pub fn total(&self) -> BigRational {
        self.table.iter().sum()
    }

    /// Exact equality of the `(A, B)` and `(E, B)` marginal tables; this is
    /// the structural symmetry that forces `I(B:A) = I(B:E)`.
    pub fn ab_eb_symmetric(&self) -> bool {
        let d = self.d;
        for x in 0..d {
            for b in 0..=d {
                let mut p_ab = BigRational::zero();
                let mut p_eb = BigRational::zero();
                for other in 0..d {
                    p_ab += self.prob_exact(x, b, other);
                    p_eb += self.prob_exact(other, b, x);
                }
                if p_ab != p_eb {
                    return false;
                }
            }
        }
        true
    }

    /// Draws `(a, b, e)` samples; `b = d` encodes `∅`.
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<(usize, usize, usize)> {
        let probs: Vec<f64> = self.table.iter().map(|p| p.to_f64().unwrap()).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let d = self.d;
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(0.0..1.0);
                let flat = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
                let e = flat % d;
                let b = (flat / d) % (d + 1);
                let a = flat / (d * (d + 1));
                (a, b, e)
            })
            .collect()
    }
}

/// Per-round conditional entropies and Csiszár-Körner rate differences, in
/// bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// `H(A|E)`: Eve's uncertainty about Alice before the click
    /// announcement.
    pub h_a_given_e: f64,
    /// `H(A|E')` with `E' = (E, C)`: after learning which rounds clicked.
    pub h_a_given_eprime: f64,
    /// Direct-reconciliation rate `I(A:B) - I(A:E)`.
    pub i_ab_minus_ae: f64,
    /// Reverse-reconciliation rate `I(B:A) - I(B:E)`.
    pub i_ba_minus_be: f64,
}

impl EntropyReport {
    /// Multiplies every quantity by the number of rounds.
    pub fn scaled(&self, n_rounds: f64) -> EntropyReport {
        EntropyReport {
            h_a_given_e: self.h_a_given_e * n_rounds,
            h_a_given_eprime: self.h_a_given_eprime * n_rounds,
            i_ab_minus_ae: self.i_ab_minus_ae * n_rounds,
            i_ba_minus_be: self.i_ba_minus_be * n_rounds,
        }
    }
}

fn xlog2(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

fn entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    -probs.into_iter().map(xlog2).sum::<f64>()
}

fn safe_log2(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.log2()
    }
}

/// Closed-form per-round report. The reverse rate is pinned to exactly zero
/// after certifying the table symmetry in exact arithmetic.
pub fn entropies(dist: &AbeDist) -> EntropyReport {
    let d = dist.alphabet() as f64;
    let eta = dist.eta();

    let p_match = eta + (1.0 - eta) / d;
    let p_miss = (1.0 - eta) / d;
    let h_a_given_e = -xlog2(p_match) - (d - 1.0) * xlog2(p_miss);
    let h_a_given_eprime = (1.0 - eta) * d.log2();
    let i_ab_minus_ae = eta * d.log2()
        - (1.0 / d)
            * ((1.0 + eta * (d - 1.0)) * safe_log2(1.0 + eta * (d - 1.0))
                + (d - 1.0) * (1.0 - eta) * safe_log2(1.0 - eta));
    let i_ba_minus_be = if dist.ab_eb_symmetric() {
        0.0
    } else {
        entropies_from_table(dist).i_ba_minus_be
    };
    EntropyReport {
        h_a_given_e,
        h_a_given_eprime,
        i_ab_minus_ae,
        i_ba_minus_be,
    }
}

/// Independent evaluation by direct summation over the table; the oracle
/// for the closed forms.
pub fn entropies_from_table(dist: &AbeDist) -> EntropyReport {
    let d = dist.alphabet();
    let mut p_abe = vec![0.0; d * (d + 1) * d];
    for a in 0..d {
        for b in 0..=d {
            for e in 0..d {
                p_abe[idx(d, a, b, e)] = dist.prob(a, b, e);
            }
        }
    }
    let p = |a: usize, b: usize, e: usize| p_abe[idx(d, a, b, e)];

    let marginal = |f: &dyn Fn(usize, usize, usize) -> usize, size: usize| -> Vec<f64> {
        let mut out = vec![0.0; size];
        for a in 0..d {
            for b in 0..=d {
                for e in 0..d {
                    out[f(a, b, e)] += p(a, b, e);
                }
            }
        }
        out
    };
    let p_a = marginal(&|a, _, _| a, d);
    let p_b = marginal(&|_, b, _| b, d + 1);
    let p_e = marginal(&|_, _, e| e, d);
    let p_ae = marginal(&|a, _, e| a * d + e, d * d);
    let p_ab = marginal(&|a, b, _| a * (d + 1) + b, d * (d + 1));
    let p_eb = marginal(&|_, b, e| e * (d + 1) + b, d * (d + 1));
    // E' = (E, C) with the click flag C = [b != ∅]
    let p_ec = marginal(&|_, b, e| e * 2 + usize::from(b != d), 2 * d);
    let p_aec = marginal(&|a, b, e| (a * d + e) * 2 + usize::from(b != d), 2 * d * d);

    let h = |v: &[f64]| entropy(v.iter().copied());
    let h_a_given_e = h(&p_ae) - h(&p_e);
    let h_a_given_eprime = h(&p_aec) - h(&p_ec);
    let i_ab = h(&p_a) + h(&p_b) - h(&p_ab);
    let i_ae = h(&p_a) + h(&p_e) - h(&p_ae);
    let i_eb = h(&p_e) + h(&p_b) - h(&p_eb);
    EntropyReport {
        h_a_given_e,
        h_a_given_eprime,
        i_ab_minus_ae: i_ab - i_ae,
        i_ba_minus_be: i_ab - i_eb,
    }
}

/// Plug-in report from observed samples.
pub fn entropies_from_samples(d: usize, samples: &[(usize, usize, usize)]) -> EntropyReport {
    let mut counts = vec![0u64; d * (d + 1) * d];
    for &(a, b, e) in samples {
        counts[idx(d, a, b, e)] += 1;
    }
    let n = BigRational::from_usize(samples.len()).expect("sample count");
    let freq = AbeDist {
        d,
        eta: f64::NAN,
        table: counts
            .iter()
            .map(|&c| BigRational::from_u64(c).expect("count") / &n)
            .collect(),
    };
    entropies_from_table(&freq)
}

/// Delta-method standard errors of the plug-in estimators at sample size
/// `n`, computed from the true distribution: the standard deviation of the
/// per-observation influence of each reported quantity.
pub fn mc_standard_errors(dist: &AbeDist, n: usize) -> EntropyReport {
    let d = dist.alphabet();
    let mut p_e = vec![0.0; d];
    let mut p_a = vec![0.0; d];
    let mut p_b = vec![0.0; d + 1];
    let mut p_ae = vec![0.0; d * d];
    let mut p_ab = vec![0.0; d * (d + 1)];
    let mut p_eb = vec![0.0; d * (d + 1)];
    let mut p_ec = vec![0.0; 2 * d];
    let mut p_aec = vec![0.0; 2 * d * d];
    for a in 0..d {
        for b in 0..=d {
            for e in 0..d {
                let p = dist.prob(a, b, e);
                p_a[a] += p;
                p_b[b] += p;
                p_e[e] += p;
                p_ae[a * d + e] += p;
                p_ab[a * (d + 1) + b] += p;
                p_eb[e * (d + 1) + b] += p;
                p_ec[e * 2 + usize::from(b != d)] += p;
                p_aec[(a * d + e) * 2 + usize::from(b != d)] += p;
            }
        }
    }
    let lg = safe_log2;
    let mut means = [0.0; 4];
    let mut second = [0.0; 4];
    for a in 0..d {
        for b in 0..=d {
            for e in 0..d {
                let p = dist.prob(a, b, e);
                if p == 0.0 {
                    continue;
                }
                let c = usize::from(b != d);
                let inf = [
                    // -log2 P(a|e)
                    -(lg(p_ae[a * d + e]) - lg(p_e[e])),
                    // -log2 P(a|e,c)
                    -(lg(p_aec[(a * d + e) * 2 + c]) - lg(p_ec[e * 2 + c])),
                    // log2 P(a,b)/(P(a)P(b)) - log2 P(a,e)/(P(a)P(e))
                    (lg(p_ab[a * (d + 1) + b]) - lg(p_a[a]) - lg(p_b[b]))
                        - (lg(p_ae[a * d + e]) - lg(p_a[a]) - lg(p_e[e])),
                    // log2 P(b,a)/(P(b)P(a)) - log2 P(b,e)/(P(b)P(e))
                    (lg(p_ab[a * (d + 1) + b]) - lg(p_a[a]) - lg(p_b[b]))
                        - (lg(p_eb[e * (d + 1) + b]) - lg(p_e[e]) - lg(p_b[b])),
                ];
                for i in 0..4 {
                    means[i] += p * inf[i];
                    second[i] += p * inf[i] * inf[i];
                }
            }
        }
    }
    let se = |i: usize| ((second[i] - means[i] * means[i]).max(0.0) / n as f64).sqrt();
    EntropyReport {
        h_a_given_e: se(0),
        h_a_given_eprime: se(1),
        i_ab_minus_ae: se(2),
        i_ba_minus_be: se(3),
    }
}

/// One pass of block-parity reconciliation. Alice announces the parity of
/// every block; Bob fills a block's erasure exactly when it is the only one
/// in that block. Returns Bob's corrected string and the announced
/// parities for leakage accounting.
pub fn parity_reconcile(
    alice_bits: &[u8],
    bob_symbols: &[Option<u8>],
    block: usize,
) -> Result<(Vec<Option<u8>>, Vec<u8>), PostselError> {
    if alice_bits.len() != bob_symbols.len() {
        return Err(PostselError::LengthMismatch {
            alice: alice_bits.len(),
            bob: bob_symbols.len(),
        });
    }
    if block < 2 {
        return Err(PostselError::BlockTooSmall(block));
    }
    for (i, &bit) in alice_bits.iter().enumerate() {
        if bit > 1 {
            return Err(PostselError::NotABit(i));
        }
    }
    let mut corrected: Vec<Option<u8>> = bob_symbols.to_vec();
    let mut parities = Vec::new();
    for start in (0..alice_bits.len()).step_by(block) {
        let end = (start + block).min(alice_bits.len());
        let parity = alice_bits[start..end].iter().fold(0u8, |acc, &b| acc ^ b);
        parities.push(parity);
        let erasures: Vec<usize> = (start..end).filter(|&i| corrected[i].is_none()).collect();
        if let [hole] = erasures.as_slice() {
            let known = (start..end)
                .filter_map(|i| corrected[i])
                .fold(0u8, |acc, b| acc ^ b);
            corrected[*hole] = Some(parity ^ known);
        }
    }
    Ok((corrected, parities))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_values_d2() {
        let dist = abe_dist(2, 2.0 / 3.0).unwrap();
        assert!((dist.prob(0, 0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((dist.prob(1, 1, 1) - 1.0 / 3.0).abs() < 1e-15);
        for a in 0..2 {
            for e in 0..2 {
                assert!((dist.prob(a, 2, e) - 1.0 / 12.0).abs() < 1e-15);
            }
        }
        assert_eq!(dist.prob(0, 1, 0), 0.0);
        assert!((dist.total().to_f64().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn endpoints() {
        let perfect = abe_dist(3, 1.0).unwrap();
        for a in 0..3 {
            assert!((perfect.prob(a, a, a) - 1.0 / 3.0).abs() < 1e-15);
            for e in 0..3 {
                assert_eq!(perfect.prob(a, 3, e), 0.0);
            }
        }
        let dark = abe_dist(3, 0.0).unwrap();
        for a in 0..3 {
            for e in 0..3 {
                assert!((dark.prob(a, 3, e) - 1.0 / 9.0).abs() < 1e-15);
            }
        }
        assert!(abe_dist(1, 0.5).is_err());
        assert!(abe_dist(2, 1.5).is_err());
    }

    #[test]
    fn reverse_rate_is_exactly_zero() {
        for d in 2..=5 {
            for eta in [0.0, 0.1, 2.0 / 3.0, 0.97, 1.0] {
                let dist = abe_dist(d, eta).unwrap();
                assert!(dist.ab_eb_symmetric());
                let r = entropies(&dist);
                assert_eq!(r.i_ba_minus_be, 0.0);
            }
        }
    }

    #[test]
    fn known_values_d2_eta_two_thirds() {
        let dist = abe_dist(2, 2.0 / 3.0).unwrap();
        let r = entropies(&dist);
        assert!((r.h_a_given_eprime - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.i_ab_minus_ae > 0.0);
        assert_eq!(r.i_ba_minus_be, 0.0);
    }

    #[test]
    fn closed_form_matches_table_summation() {
        for d in 2..=6 {
            for i in 0..=10 {
                let eta = i as f64 / 10.0;
                let dist = abe_dist(d, eta).unwrap();
                let closed = entropies(&dist);
                let table = entropies_from_table(&dist);
                assert!(
                    (closed.h_a_given_e - table.h_a_given_e).abs() <= 1e-12,
                    "H(A|E) at d={d}, eta={eta}: {} vs {}",
                    closed.h_a_given_e,
                    table.h_a_given_e
                );
                assert!((closed.h_a_given_eprime - table.h_a_given_eprime).abs() <= 1e-12);
                assert!((closed.i_ab_minus_ae - table.i_ab_minus_ae).abs() <= 1e-12);
                assert!((closed.i_ba_minus_be - table.i_ba_minus_be).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn announcement_strictly_helps_eve() {
        for d in 2..=6 {
            for i in 1..10 {
                let eta = i as f64 / 10.0;
                let r = entropies(&abe_dist(d, eta).unwrap());
                assert!(
                    r.h_a_given_eprime < r.h_a_given_e,
                    "no strict drop at d={d}, eta={eta}"
                );
            }
        }
    }

    #[test]
    fn direct_rate_positive_strictly_inside() {
        for d in [2usize, 3, 5] {
            for eta in [0.1, 0.5, 0.9] {
                let r = entropies(&abe_dist(d, eta).unwrap());
                assert!(
                    r.i_ab_minus_ae > 0.0,
                    "rate not positive at d={d}, eta={eta}"
                );
            }
        }
    }

    #[test]
    fn sampling_matches_closed_form() {
        let dist = abe_dist(2, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 200_000;
        let samples = dist.sample(&mut rng, n);
        let emp = entropies_from_samples(2, &samples);
        let truth = entropies(&dist);
        let se = mc_standard_errors(&dist, n);
        assert!((emp.h_a_given_e - truth.h_a_given_e).abs() <= 3.0 * se.h_a_given_e + 1e-4);
        assert!(
            (emp.h_a_given_eprime - truth.h_a_given_eprime).abs()
                <= 3.0 * se.h_a_given_eprime + 1e-4
        );
        assert!((emp.i_ab_minus_ae - truth.i_ab_minus_ae).abs() <= 3.0 * se.i_ab_minus_ae + 1e-4);
        assert!((emp.i_ba_minus_be - truth.i_ba_minus_be).abs() <= 3.0 * se.i_ba_minus_be + 1e-4);
    }

    #[test]
    fn parity_fills_single_erasure() {
        // Alice 00101, Bob 001∅1: the announced parity reveals the missing
        // bit is 0
        let alice = [0u8, 0, 1, 0, 1];
        let bob = [Some(0u8), Some(0), Some(1), None, Some(1)];
        let (fixed, parities) = parity_reconcile(&alice, &bob, 5).unwrap();
        assert_eq!(parities, vec![0]);
        assert_eq!(fixed[3], Some(0));
        assert_eq!(fixed[0], Some(0));
    }

    #[test]
    fn parity_no_erasures_and_underdetermined() {
        let alice = [1u8, 0, 1, 1];
        let bob = [Some(1u8), Some(0), Some(1), Some(1)];
        let (fixed, parities) = parity_reconcile(&alice, &bob, 4).unwrap();
        assert_eq!(fixed, bob.to_vec());
        assert_eq!(parities.len(), 1);

        let bob2 = [None, Some(0), None, Some(1)];
        let (fixed2, _) = parity_reconcile(&alice, &bob2, 4).unwrap();
        assert_eq!(fixed2, bob2.to_vec());
    }

    #[test]
    fn parity_never_flips_known_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 40;
            let alice: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            let bob: Vec<Option<u8>> = alice
                .iter()
                .map(|&b| if rng.gen_bool(0.3) { None } else { Some(b) })
                .collect();
            let (fixed, _) = parity_reconcile(&alice, &bob, 5).unwrap();
            for i in 0..n {
                if let Some(orig) = bob[i] {
                    assert_eq!(fixed[i], Some(orig));
                }
                // filled values agree with Alice's bits: Bob's known bits
                // equal Alice's in this noiseless model
                if bob[i].is_none() && fixed[i].is_some() {
                    assert_eq!(fixed[i], Some(alice[i]));
                }
            }
        }
    }

    #[test]
    fn parity_rejects_bad_input() {
        assert!(parity_reconcile(&[0, 1], &[Some(0)], 2).is_err());
        assert!(parity_reconcile(&[0, 1], &[Some(0), Some(1)], 1).is_err());
        assert!(parity_reconcile(&[0, 2], &[Some(0), Some(1)], 2).is_err());
    }
}
