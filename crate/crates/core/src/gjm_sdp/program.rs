//! Lowering of an (assembly, guessable-subset) pair to the block-PSD
//! feasibility program with deterministic responses.
//!
//! For each response tuple `β̄` and setting `y`, the surviving variables are
//! the blocks `E_{β̄,b|y}` for outcomes `b` outside the guessable subset,
//! plus a single star block when the subset is nonempty; the guessable
//! blocks are `δ_{b,β_y}` copies of the star block and are never
//! materialized. Constraints:
//!
//! - no-signaling: the `b`-marginal of each `β̄` row agrees across settings
//!   (encoded pairwise on consecutive settings);
//! - consistency: the blocks of every `(y, b)` reconstruct the assembly
//!   effect, where for guessable `b` only the tuples with `β_y = b`
//!   contribute their star block.
//!
//! Global completeness of the `β̄`-marginals is implied by consistency plus
//! POVM completeness and is asserted in debug builds rather than added as a
//! constraint.

use std::collections::BTreeMap;

use crate::matqm::HermMat;
use crate::povm::{beta_tuples, Assembly, GSpec, Outcome};

use super::SdpError;

/// Identity of one PSD block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockKey {
    /// Index into the response-tuple list.
    pub beta: usize,
    /// Measurement setting.
    pub setting: usize,
    pub slot: BlockSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockSlot {
    /// Block of an outcome outside the guessable subset.
    Effect(Outcome),
    /// The shared block of the guessable outcomes.
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    NoSignaling {
        beta: usize,
        setting_a: usize,
        setting_b: usize,
    },
    Consistency {
        setting: usize,
        outcome: Outcome,
    },
}

/// Hermitian-valued equality `Σ_k coeff_k · X_{block_k} = rhs`.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    pub kind: ConstraintKind,
    pub terms: Vec<(usize, f64)>,
    pub rhs: HermMat,
}

#[derive(Debug, Clone)]
pub struct GjmProgram {
    dim: usize,
    beta_tuples: Vec<Vec<Option<Outcome>>>,
    blocks: Vec<BlockKey>,
    constraints: Vec<AffineConstraint>,
}

impl GjmProgram {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[BlockKey] {
        &self.blocks
    }

    pub fn beta_tuples(&self) -> &[Vec<Option<Outcome>>] {
        &self.beta_tuples
    }

    pub fn constraints(&self) -> &[AffineConstraint] {
        &self.constraints
    }

    pub fn block_index(&self, key: &BlockKey) -> Option<usize> {
        self.blocks.binary_search(key).ok()
    }

    /// Largest entrywise violation of the affine constraints by a candidate
    /// block assignment (ordered like [`Self::blocks`]).
    pub fn constraint_violation(&self, blocks: &[HermMat]) -> f64 {
        assert_eq!(blocks.len(), self.blocks.len(), "block count mismatch");
        let mut worst = 0.0_f64;
        for c in &self.constraints {
            let mut lhs = HermMat::zeros(self.dim);
            for &(idx, coeff) in &c.terms {
                lhs = lhs.add(&blocks[idx].scale(coeff));
            }
            worst = worst.max(lhs.max_abs_diff(&c.rhs));
        }
        worst
    }

    /// Smallest eigenvalue over all blocks of a candidate assignment.
    pub fn min_block_eigenvalue(&self, blocks: &[HermMat]) -> f64 {
        blocks
            .iter()
            .map(HermMat::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Reconstruction `Σ_β̄ E_{β̄,b|y}` of one assembly effect from a witness.
    pub fn reconstruct_effect(
        &self,
        blocks: &[HermMat],
        setting: usize,
        outcome: Outcome,
    ) -> HermMat {
        let mut sum = HermMat::zeros(self.dim);
        for c in &self.constraints {
            if c.kind == (ConstraintKind::Consistency { setting, outcome }) {
                for &(idx, coeff) in &c.terms {
                    sum = sum.add(&blocks[idx].scale(coeff));
                }
            }
        }
        sum
    }
}

/// Builds the feasibility program for `a` under the guessable subsets `g`.
pub fn build_program(a: &Assembly, g: &GSpec) -> Result<GjmProgram, SdpError> {
    if g.n_settings() != a.n_settings() {
        return Err(SdpError::SpecMismatch(format!(
            "{} subsets for {} settings",
            g.n_settings(),
            a.n_settings()
        )));
    }
    for y in 0..a.n_settings() {
        for &label in g.subset(y) {
            if a.povm(y).effect(label).is_none() {
                return Err(SdpError::SpecMismatch(format!(
                    "setting {y}: label {label} not in the POVM"
                )));
            }
        }
    }

    let dim = a.dim();
    let n = a.n_settings();
    let tuples = beta_tuples(g);

    let mut blocks = Vec::new();
    for beta in 0..tuples.len() {
        for y in 0..n {
            for b in g.complement(y, a.povm(y)) {
                blocks.push(BlockKey {
                    beta,
                    setting: y,
                    slot: BlockSlot::Effect(b),
                });
            }
            if !g.subset(y).is_empty() {
                blocks.push(BlockKey {
                    beta,
                    setting: y,
                    slot: BlockSlot::Star,
                });
            }
        }
    }
    blocks.sort();
    let lookup: BTreeMap<BlockKey, usize> =
        blocks.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    // marginal of one (β̄, y) row: all complement blocks plus the star block
    let marginal_terms = |beta: usize, y: usize| -> Vec<(usize, f64)> {
        let mut terms: Vec<(usize, f64)> = g
            .complement(y, a.povm(y))
            .into_iter()
            .map(|b| {
                (
                    lookup[&BlockKey {
                        beta,
                        setting: y,
                        slot: BlockSlot::Effect(b),
                    }],
                    1.0,
                )
            })
            .collect();
        if !g.subset(y).is_empty() {
            terms.push((
                lookup[&BlockKey {
                    beta,
                    setting: y,
                    slot: BlockSlot::Star,
                }],
                1.0,
            ));
        }
        terms
    };

    let mut constraints = Vec::new();
    for beta in 0..tuples.len() {
        for y in 0..n.saturating_sub(1) {
            let mut terms = marginal_terms(beta, y);
            for (idx, coeff) in marginal_terms(beta, y + 1) {
                terms.push((idx, -coeff));
            }
            constraints.push(AffineConstraint {
                kind: ConstraintKind::NoSignaling {
                    beta,
                    setting_a: y,
                    setting_b: y + 1,
                },
                terms,
                rhs: HermMat::zeros(dim),
            });
        }
    }
    for y in 0..n {
        for &b in a.povm(y).labels() {
            let terms: Vec<(usize, f64)> = if g.subset(y).contains(&b) {
                tuples
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t[y] == Some(b))
                    .map(|(beta, _)| {
                        (
                            lookup[&BlockKey {
                                beta,
                                setting: y,
                                slot: BlockSlot::Star,
                            }],
                            1.0,
                        )
                    })
                    .collect()
            } else {
                (0..tuples.len())
                    .map(|beta| {
                        (
                            lookup[&BlockKey {
                                beta,
                                setting: y,
                                slot: BlockSlot::Effect(b),
                            }],
                            1.0,
                        )
                    })
                    .collect()
            };
            constraints.push(AffineConstraint {
                kind: ConstraintKind::Consistency {
                    setting: y,
                    outcome: b,
                },
                terms,
                rhs: a.povm(y).effect(b).expect("label validated").clone(),
            });
        }
    }

    // completeness of each POVM makes Σ_β̄ E_β̄ = I redundant
    #[cfg(debug_assertions)]
    for y in 0..n {
        let mut sum = HermMat::zeros(dim);
        for e in a.povm(y).effects() {
            sum = sum.add(e);
        }
        debug_assert!(sum.max_abs_diff(&HermMat::identity(dim)) < 1e-9);
    }

    // every surviving variable is pinned by at least one constraint (the
    // consistency row of its own outcome, or of the tuple's assigned
    // outcome for star blocks), which also bounds the max slack
    let mut covered = vec![false; blocks.len()];
    for c in &constraints {
        for &(idx, _) in &c.terms {
            covered[idx] = true;
        }
    }
    debug_assert!(covered.iter().all(|&c| c), "unconstrained block variable");

    Ok(GjmProgram {
        dim,
        beta_tuples: tuples,
        blocks,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matqm::BlochVec;
    use crate::povm::{apply_loss, gspec_case, qubit_assembly, GCase};

    fn zx_lossy(eta: f64) -> Assembly {
        apply_loss(&qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap(), eta).unwrap()
    }

    #[test]
    fn case_c_block_count() {
        let a = zx_lossy(0.5);
        let g = gspec_case(GCase::C, &a).unwrap();
        let p = build_program(&a, &g).unwrap();
        assert_eq!(p.beta_tuples().len(), 4);
        // per (β̄, y): one no-click block plus the star block
        assert_eq!(p.n_blocks(), 16);
        let stars = p
            .blocks()
            .iter()
            .filter(|k| k.slot == BlockSlot::Star)
            .count();
        assert_eq!(stars, 8);
    }

    #[test]
    fn full_g_keeps_only_star_blocks() {
        let a = zx_lossy(0.5);
        let g = gspec_case(GCase::A, &a).unwrap();
        let p = build_program(&a, &g).unwrap();
        assert_eq!(p.beta_tuples().len(), 9);
        assert!(p.blocks().iter().all(|k| k.slot == BlockSlot::Star));
        assert_eq!(p.n_blocks(), 18);
    }

    #[test]
    fn empty_g_is_identity_reconstruction() {
        let a = zx_lossy(0.5);
        let g = GSpec::new(vec![Default::default(), Default::default()], &a).unwrap();
        let p = build_program(&a, &g).unwrap();
        assert_eq!(p.beta_tuples().len(), 1);
        assert_eq!(p.n_blocks(), 6);
        // explicit witness: the honest blocks themselves
        let witness: Vec<HermMat> = p
            .blocks()
            .iter()
            .map(|k| match k.slot {
                BlockSlot::Effect(b) => a.povm(k.setting).effect(b).unwrap().clone(),
                BlockSlot::Star => unreachable!("no star blocks with empty subsets"),
            })
            .collect();
        assert!(p.constraint_violation(&witness) < 1e-12);
        assert!(p.min_block_eigenvalue(&witness) > -1e-12);
    }

    #[test]
    fn every_block_appears_in_a_constraint() {
        for case in [GCase::A, GCase::B, GCase::C, GCase::D] {
            let a = zx_lossy(0.5);
            let g = gspec_case(case, &a).unwrap();
            let p = build_program(&a, &g).unwrap();
            let mut covered = vec![false; p.n_blocks()];
            for c in p.constraints() {
                for &(idx, _) in &c.terms {
                    covered[idx] = true;
                }
            }
            assert!(covered.iter().all(|&x| x), "uncovered block in case {case:?}");
        }
    }

    #[test]
    fn rejects_mismatched_spec() {
        let a = zx_lossy(0.5);
        let b = apply_loss(
            &qubit_assembly(&[BlochVec::Z, BlochVec::X, BlochVec::Y]).unwrap(),
            0.5,
        )
        .unwrap();
        let g3 = gspec_case(GCase::A, &b).unwrap();
        assert!(build_program(&a, &g3).is_err());
    }
}
