//! Partial-parent operator collections and the two canonical conversions:
//! realizing a set of effective operators as an explicit strategy
//! (square-root instrument plus renormalized conditional measurements), and
//! derandomizing a probabilistic response into deterministic tuples.

use std::collections::{BTreeMap, BTreeSet};

use crate::matqm::{herm_sqrt, pinv_sqrt, support_projector, HermMat};
use crate::povm::{beta_tuples_from, Assembly, Outcome};

use super::{EffectSet, Instrument, Strategy, StrategyError};

/// Effective operators `E_{c,b|y}` with a response table: the
/// instrument-free description of a strategy.
#[derive(Debug, Clone)]
pub struct PartialParent {
    pub dim: usize,
    /// Outcome labels per setting (the `b` index of the blocks).
    pub labels: Vec<Vec<Outcome>>,
    /// Guessable subsets per setting.
    pub subsets: Vec<BTreeSet<Outcome>>,
    /// Blocks indexed `[c][y][label position]`.
    pub blocks: Vec<Vec<Vec<HermMat>>>,
    /// `p(b|y,c)` rows over the guessable subsets, indexed `[y][c]`.
    pub response: Vec<Vec<BTreeMap<Outcome, f64>>>,
}

/// Residuals of the defining conditions of a partial-parent collection.
#[derive(Debug, Clone)]
pub struct PpResiduals {
    pub nosignaling: f64,
    pub consistency: f64,
    pub partial_jm: f64,
    pub min_psd: f64,
}

impl PpResiduals {
    pub fn passes(&self, tol: f64) -> bool {
        self.nosignaling <= tol
            && self.consistency <= tol
            && self.partial_jm <= tol
            && self.min_psd >= -tol
    }
}

impl PartialParent {
    pub fn n_outcomes(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_settings(&self) -> usize {
        self.labels.len()
    }

    fn block(&self, c: usize, y: usize, b: Outcome) -> &HermMat {
        let bi = self.labels[y]
            .iter()
            .position(|&l| l == b)
            .expect("label present");
        &self.blocks[c][y][bi]
    }

    /// Marginal `Σ_b E_{c,b|y}` for one `(c, y)`.
    pub fn marginal(&self, c: usize, y: usize) -> HermMat {
        let mut sum = HermMat::zeros(self.dim);
        for block in &self.blocks[c][y] {
            sum = sum.add(block);
        }
        sum
    }

    /// Parent element `E_c`, read off the first setting's marginal (the
    /// marginals agree across settings up to the no-signaling residual).
    pub fn parent_element(&self, c: usize) -> HermMat {
        self.marginal(c, 0)
    }

    /// Star operator `E_{c,⋆|y} = E_c - Σ_{b ∉ G_y} E_{c,b|y}`.
    pub fn star(&self, c: usize, y: usize) -> HermMat {
        let mut star = self.parent_element(c);
        for (bi, &b) in self.labels[y].iter().enumerate() {
            if !self.subsets[y].contains(&b) {
                star = star.sub(&self.blocks[c][y][bi]);
            }
        }
        star
    }

    /// Checks the no-signaling, consistency, and partial-JM conditions
    /// against a lossy assembly.
    pub fn validate(&self, a_lossy: &Assembly) -> Result<PpResiduals, StrategyError> {
        if a_lossy.n_settings() != self.n_settings() || a_lossy.dim() != self.dim {
            return Err(StrategyError::ShapeMismatch(
                "assembly does not match the partial-parent shape".into(),
            ));
        }
        for y in 0..self.n_settings() {
            if a_lossy.povm(y).labels() != self.labels[y].as_slice() {
                return Err(StrategyError::ShapeMismatch(format!(
                    "labels of setting {y} do not match the assembly"
                )));
            }
        }
        let mut min_psd = f64::INFINITY;
        let mut nosignaling = 0.0_f64;
        let mut consistency = 0.0_f64;
        let mut partial_jm = 0.0_f64;
        for c in 0..self.n_outcomes() {
            let parent = self.parent_element(c);
            for y in 0..self.n_settings() {
                nosignaling = nosignaling.max(self.marginal(c, y).max_abs_diff(&parent));
                for block in &self.blocks[c][y] {
                    min_psd = min_psd.min(block.min_eigenvalue());
                }
                if self.subsets[y].is_empty() {
                    continue;
                }
                let star = self.star(c, y);
                min_psd = min_psd.min(star.min_eigenvalue());
                let row = &self.response[y][c];
                let row_sum: f64 = row.values().sum();
                if (row_sum - 1.0).abs() > 1e-9 {
                    return Err(StrategyError::ResponseNotNormalized { y, c, sum: row_sum });
                }
                for &b in &self.subsets[y] {
                    let p = row.get(&b).copied().unwrap_or(0.0);
                    partial_jm = partial_jm.max(self.block(c, y, b).max_abs_diff(&star.scale(p)));
                }
            }
        }
        for y in 0..self.n_settings() {
            for (bi, &b) in self.labels[y].iter().enumerate() {
                let mut sum = HermMat::zeros(self.dim);
                for c in 0..self.n_outcomes() {
                    sum = sum.add(&self.blocks[c][y][bi]);
                }
                consistency = consistency.max(sum.max_abs_diff(a_lossy.povm(y).effect(b).unwrap()));
            }
        }
        Ok(PpResiduals {
            nosignaling,
            consistency,
            partial_jm,
            min_psd,
        })
    }
}

/// Realizes partial-parent operators as an explicit strategy: the
/// square-root instrument `I_c(ρ) = √E_c ρ √E_c` with conditional effects
/// `E_c^{-1/2} E_{c,b|y} E_c^{-1/2}`, complete on the support of `E_c`.
pub fn pp_to_strategy(pp: &PartialParent) -> Result<Strategy, StrategyError> {
    let rank_tol = 1e-10;
    let n_c = pp.n_outcomes();
    let n = pp.n_settings();

    let mut kraus = Vec::with_capacity(n_c);
    let mut inv_roots = Vec::with_capacity(n_c);
    let mut projectors = Vec::with_capacity(n_c);
    for c in 0..n_c {
        let parent = pp.parent_element(c);
        kraus.push(vec![herm_sqrt(&parent)?.into_matrix()]);
        inv_roots.push(pinv_sqrt(&parent, rank_tol)?);
        projectors.push(support_projector(&parent, rank_tol)?);
    }
    let instrument = Instrument::new(kraus)?;

    let mut conditionals = Vec::with_capacity(n);
    for y in 0..n {
        let mut cond_row = Vec::with_capacity(n_c);
        for c in 0..n_c {
            let mut effects = Vec::with_capacity(pp.labels[y].len());
            for block in &pp.blocks[c][y] {
                // every block must live on the support of its parent element
                let restricted = block.sandwich(projectors[c].as_matrix());
                let dev = restricted.max_abs_diff(block);
                if dev > 1e-9 * block.max_abs().max(1.0) {
                    return Err(StrategyError::SupportViolation(dev));
                }
                effects.push(block.sandwich(inv_roots[c].as_matrix()));
            }
            cond_row.push(EffectSet::new(pp.labels[y].clone(), effects)?);
        }
        conditionals.push(cond_row);
    }

    // deterministic responses double as the guess function
    let guess: Vec<Vec<Option<Outcome>>> = (0..n)
        .map(|y| {
            (0..n_c)
                .map(|c| {
                    let row = &pp.response[y][c];
                    row.iter()
                        .find(|(_, &p)| (p - 1.0).abs() <= 1e-9)
                        .map(|(&b, _)| b)
                })
                .collect()
        })
        .collect();
    Strategy::new(instrument, conditionals, pp.response.clone(), guess)
}

/// Derandomization: merges the classical outcomes into deterministic
/// response tuples `β̄` via `E_{β̄,b|y} = Σ_c p(β̄|c) E_{c,b|y}` with
/// `p(β̄|c) = Π_{y: G_y ≠ ∅} p(β_y|y,c)`. Statistics are preserved exactly;
/// the output response is the deterministic table `δ_{b,β_y}`.
pub fn randomize_to_deterministic(pp: &PartialParent) -> Result<PartialParent, StrategyError> {
    let n = pp.n_settings();
    let n_c = pp.n_outcomes();
    for y in 0..n {
        if pp.subsets[y].is_empty() {
            continue;
        }
        for c in 0..n_c {
            let sum: f64 = pp.response[y][c].values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(StrategyError::ResponseNotNormalized { y, c, sum });
            }
        }
    }

    let tuples = beta_tuples_from(&pp.subsets);
    let weight = |tuple: &[Option<Outcome>], c: usize| -> f64 {
        let mut w = 1.0;
        for y in 0..n {
            if let Some(beta_y) = tuple[y] {
                w *= pp.response[y][c].get(&beta_y).copied().unwrap_or(0.0);
            }
        }
        w
    };

    let mut blocks = Vec::with_capacity(tuples.len());
    for tuple in &tuples {
        let mut per_setting = Vec::with_capacity(n);
        for y in 0..n {
            let mut per_label = Vec::with_capacity(pp.labels[y].len());
            for (bi, &b) in pp.labels[y].iter().enumerate() {
                let mut acc = HermMat::zeros(pp.dim);
                if pp.subsets[y].contains(&b) {
                    if tuple[y] == Some(b) {
                        for c in 0..n_c {
                            let w = weight(tuple, c);
                            if w > 0.0 {
                                acc = acc.add(&pp.star(c, y).scale(w));
                            }
                        }
                    }
                } else {
                    for c in 0..n_c {
                        let w = weight(tuple, c);
                        if w > 0.0 {
                            acc = acc.add(&pp.blocks[c][y][bi].scale(w));
                        }
                    }
                }
                per_label.push(acc);
            }
            per_setting.push(per_label);
        }
        blocks.push(per_setting);
    }

    let response: Vec<Vec<BTreeMap<Outcome, f64>>> = (0..n)
        .map(|y| {
            tuples
                .iter()
                .map(|tuple| match tuple[y] {
                    Some(beta_y) => BTreeMap::from([(beta_y, 1.0)]),
                    None => BTreeMap::new(),
                })
                .collect()
        })
        .collect();

    Ok(PartialParent {
        dim: pp.dim,
        labels: pp.labels.clone(),
        subsets: pp.subsets.clone(),
        blocks,
        response,
    })
}
