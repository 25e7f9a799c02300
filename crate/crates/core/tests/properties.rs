//! Property tests: structural invariants checked over randomized inputs.
//!
//! The headline property is downward closure of the feasible-efficiency
//! set, which underwrites the threshold bisection: the lossy effects are
//! affine in the efficiency and the all-no-click device is reproducible,
//! so a convex combination of a feasible witness at eta_2 with the
//! all-no-click witness must solve the program at any eta_1 < eta_2. The
//! test constructs that combination explicitly and checks it against the
//! lowered program rather than assuming the argument.

use std::collections::BTreeSet;

use proptest::prelude::*;

use gjm_core::gjm_sdp::{build_program, parse_sdpa, solve, BlockSlot, Status, Transform};
use gjm_core::matqm::{self, herm_sqrt, pinv_sqrt, support_projector, BlochVec, HermMat};
use gjm_core::povm::{
    apply_loss, beta_tuples, gspec_case, gspec_case as case_of, qubit_assembly, Assembly, GCase,
    GSpec, Outcome,
};

fn herm_strategy(dim: usize) -> impl Strategy<Value = HermMat> {
    proptest::collection::vec(-1.0..1.0f64, 2 * dim * dim).prop_map(move |vals| {
        let mut m = matqm::CplxMat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                m[(i, j)] = matqm::C64::new(vals[k], vals[k + 1]);
            }
        }
        HermMat::new(m).expect("square")
    })
}

fn psd_strategy(dim: usize) -> impl Strategy<Value = HermMat> {
    herm_strategy(dim).prop_map(|h| {
        let m = h.as_matrix();
        HermMat::new(m * m.adjoint()).expect("G G† is Hermitian")
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn herm_sqrt_is_left_inverse_of_square(dim in 2usize..=6, seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let m = matqm::random_psd(dim, dim, &mut rng);
        let s = herm_sqrt(&m).unwrap();
        let sq = HermMat::new(s.as_matrix() * s.as_matrix()).unwrap();
        prop_assert!(sq.max_abs_diff(&m) <= 1e-9 * m.max_abs().max(1.0));
    }

    #[test]
    fn pinv_sqrt_reproduces_support(dim in 2usize..=6, rank in 1usize..=3, seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let rank = rank.min(dim);
        let m = matqm::random_psd(dim, rank, &mut rng);
        let inv_root = pinv_sqrt(&m, 1e-10).unwrap();
        let proj = support_projector(&m, 1e-10).unwrap();
        let recon = m.sandwich(inv_root.as_matrix());
        prop_assert!(recon.max_abs_diff(&proj) <= 1e-9);
    }

    #[test]
    fn psd_strategy_is_psd(m in psd_strategy(3)) {
        prop_assert!(m.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn lossy_completeness_is_exact(angles in proptest::collection::vec(0.0..std::f64::consts::PI, 1..4),
                                   eta in 0.0..=1.0f64) {
        let a = qubit_assembly(&angles.iter().map(|&x| BlochVec::xz_plane(x)).collect::<Vec<_>>()).unwrap();
        let lossy = apply_loss(&a, eta).unwrap();
        for y in 0..lossy.n_settings() {
            let mut sum = HermMat::zeros(2);
            for e in lossy.povm(y).effects() {
                sum = sum.add(e);
            }
            prop_assert!(sum.max_abs_diff(&HermMat::identity(2)) <= 1e-12);
        }
    }

    #[test]
    fn loss_is_affine_in_eta(angles in proptest::collection::vec(0.0..std::f64::consts::PI, 1..4),
                             eta in 0.0..=1.0f64) {
        let a = qubit_assembly(&angles.iter().map(|&x| BlochVec::xz_plane(x)).collect::<Vec<_>>()).unwrap();
        let b_eta = apply_loss(&a, eta).unwrap();
        let b_one = apply_loss(&a, 1.0).unwrap();
        let b_zero = apply_loss(&a, 0.0).unwrap();
        for y in 0..a.n_settings() {
            for &label in b_eta.povm(y).labels() {
                let combo = b_one.povm(y).effect(label).unwrap().scale(eta)
                    .add(&b_zero.povm(y).effect(label).unwrap().scale(1.0 - eta));
                prop_assert!(b_eta.povm(y).effect(label).unwrap().max_abs_diff(&combo) <= 1e-12);
            }
        }
    }
}

/// All-no-click witness of the program at eta = 0: product weights over the
/// response tuples, with the per-setting factor a point mass on the
/// no-click label when it is guessable and uniform otherwise.
fn no_click_witness(program: &gjm_core::gjm_sdp::GjmProgram, g: &GSpec) -> Vec<HermMat> {
    let dim = program.dim();
    let tuples = program.beta_tuples();
    let weight_of = |tuple: &[Option<Outcome>]| -> f64 {
        let mut w = 1.0;
        for (y, beta_y) in tuple.iter().enumerate() {
            let subset = g.subset(y);
            if subset.is_empty() {
                continue;
            }
            if subset.contains(&Outcome::NoClick) {
                w *= if *beta_y == Some(Outcome::NoClick) {
                    1.0
                } else {
                    0.0
                };
            } else {
                w *= 1.0 / subset.len() as f64;
            }
        }
        w
    };
    program
        .blocks()
        .iter()
        .map(|key| {
            let w = weight_of(&tuples[key.beta]);
            match key.slot {
                BlockSlot::Effect(b) => {
                    if b == Outcome::NoClick {
                        HermMat::scaled_identity(dim, w)
                    } else {
                        HermMat::zeros(dim)
                    }
                }
                BlockSlot::Star => {
                    if g.subset(key.setting).contains(&Outcome::NoClick) {
                        HermMat::scaled_identity(dim, w)
                    } else {
                        HermMat::zeros(dim)
                    }
                }
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn feasible_set_is_downward_closed(
        theta in 0.2..1.5f64,
        third in proptest::option::of(0.2..2.8f64),
        eta2 in 0.1..0.9f64,
        lambda in 0.1..0.9f64,
        case_idx in 0usize..4,
        nu_vis in proptest::option::of(0.7..1.0f64),
    ) {
        let case = [GCase::A, GCase::B, GCase::C, GCase::D][case_idx];
        let mut angles = vec![0.0, theta];
        if let Some(t) = third {
            angles.push(t);
        }
        let a = qubit_assembly(&angles.iter().map(|&x| BlochVec::xz_plane(x)).collect::<Vec<_>>()).unwrap();
        let transform = match nu_vis {
            Some(nu) => Transform::LossVisibility { nu_vis: nu },
            None => Transform::Loss,
        };

        let lossy2 = transform.apply(&a, eta2).unwrap();
        let g2 = gspec_case(case, &lossy2).unwrap();
        let p2 = build_program(&lossy2, &g2).unwrap();
        let report = solve(&p2, 1e-8);
        prop_assume!(report.status != Status::Infeasible);
        let w2 = report.witness.expect("witness present");

        let eta1 = lambda * eta2;
        let lossy1 = transform.apply(&a, eta1).unwrap();
        let g1 = gspec_case(case, &lossy1).unwrap();
        let p1 = build_program(&lossy1, &g1).unwrap();
        prop_assert_eq!(p1.blocks(), p2.blocks());

        let w0 = no_click_witness(&p1, &g1);
        let combined: Vec<HermMat> = w2
            .iter()
            .zip(&w0)
            .map(|(b2, b0)| b2.scale(lambda).add(&b0.scale(1.0 - lambda)))
            .collect();
        let violation = p1.constraint_violation(&combined);
        let min_eig = p1.min_block_eigenvalue(&combined);
        prop_assert!(violation <= 1e-9, "constraint violation {} for case {:?}", violation, case);
        prop_assert!(min_eig >= -1e-9, "negative block {} for case {:?}", min_eig, case);
    }

    #[test]
    fn sdpa_export_round_trips(theta in 0.2..1.5f64, eta in 0.1..0.9f64, case_idx in 0usize..4) {
        let case = [GCase::A, GCase::B, GCase::C, GCase::D][case_idx];
        let a = qubit_assembly(&[BlochVec::Z, BlochVec::xz_plane(theta)]).unwrap();
        let lossy = apply_loss(&a, eta).unwrap();
        let g = case_of(case, &lossy).unwrap();
        let p = build_program(&lossy, &g).unwrap();
        let text = gjm_core::gjm_sdp::export_sdpa(&p, true);
        let parsed = parse_sdpa(&text).unwrap();
        prop_assert_eq!(parsed.block_sizes.len(), p.n_blocks());
        prop_assert!(parsed.block_sizes.iter().all(|&s| s == 2 * p.dim() as i64));
        prop_assert_eq!(parsed.objective.last().copied(), Some(-1.0));
        // the slack matrix is -I in every block
        let ft = parsed.matrix(parsed.n_vars);
        for m in &ft {
            let dev = (m + nalgebra::DMatrix::<f64>::identity(m.nrows(), m.ncols())).amax();
            prop_assert!(dev <= 1e-15);
        }
    }
}

#[test]
fn beta_tuple_count_matches_product_rule() {
    let a = apply_loss(&qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap(), 0.5).unwrap();
    for case in [GCase::A, GCase::B, GCase::C, GCase::D] {
        let g = gspec_case(case, &a).unwrap();
        let expected: usize = g.subsets().iter().map(|s| s.len().max(1)).product();
        assert_eq!(beta_tuples(&g).len(), expected);
    }
}

#[test]
fn gspec_rejects_foreign_labels() {
    let a = apply_loss(&qubit_assembly(&[BlochVec::Z]).unwrap(), 0.5).unwrap();
    let bad = vec![BTreeSet::from([Outcome::Click(9)])];
    assert!(GSpec::new(bad, &a).is_err());
}

#[test]
fn witness_reconstructs_assembly_when_not_infeasible() {
    // spec invariant: a non-infeasible solve returns blocks whose
    // consistency rows reconstruct the lossy effects within tolerance
    let a = qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap();
    let lossy = apply_loss(&a, 0.45).unwrap();
    let g = gspec_case(GCase::C, &lossy).unwrap();
    let p = build_program(&lossy, &g).unwrap();
    let report = solve(&p, 1e-7);
    assert_ne!(report.status, Status::Infeasible);
    let w = report.witness.unwrap();
    for y in 0..2 {
        for &b in lossy.povm(y).labels() {
            let recon = p.reconstruct_effect(&w, y, b);
            assert!(recon.max_abs_diff(lossy.povm(y).effect(b).unwrap()) <= 1e-7);
        }
    }
}

#[test]
fn assembly_json_survives_arbitrary_hermitian_noise() {
    // JSON round trip is exact even for effects with irrational entries
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    for _ in 0..10 {
        let r1 = matqm::random_unit_bloch(&mut rng);
        let r2 = matqm::random_unit_bloch(&mut rng);
        let a = apply_loss(&qubit_assembly(&[r1, r2]).unwrap(), 0.61803).unwrap();
        let b = Assembly::from_json(&a.to_json()).unwrap();
        for y in 0..2 {
            for (e1, e2) in a.povm(y).effects().iter().zip(b.povm(y).effects()) {
                assert_eq!(e1.max_abs_diff(e2), 0.0);
            }
        }
    }
}
