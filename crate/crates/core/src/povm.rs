//! Measurement assemblies, guessable-outcome specifications, and the
//! loss/visibility transforms.
//!
//! Outcome labels are explicit values rather than positional indices, so the
//! no-click outcome `∅` is a first-class label and guessable subsets
//! reference labels directly. A lossy device with detection efficiency `η`
//! maps each ideal effect `B` to `η B` and adds the no-click effect
//! `(1-η) I`; the finite-visibility variant additionally depolarizes the
//! conclusive effects toward `t_b I` with `t_b = Tr(B)/Tr(I)` computed from
//! the ideal (pre-loss) effects.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matqm::{bloch_projector, validate_povm_effects, BlochVec, HermMat, MatError, C64};

#[derive(Debug, Error)]
pub enum PovmError {
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error("labels and effects must have equal nonzero length")]
    LabelEffectMismatch,
    #[error("duplicate outcome label {0}")]
    DuplicateLabel(Outcome),
    #[error("assembly needs at least one setting")]
    EmptyAssembly,
    #[error("POVMs in an assembly must share one dimension")]
    MixedDimensions,
    #[error("parameter {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("assembly is already lossy (has a no-click outcome)")]
    AlreadyLossy,
    #[error("assembly is not lossy (no no-click outcome); apply a loss transform first")]
    NotLossy,
    #[error("setting {setting}: guessable subset contains unknown label {label}")]
    UnknownLabel { setting: usize, label: Outcome },
    #[error("guessable-subset count {got} does not match settings {expected}")]
    SubsetCountMismatch { got: usize, expected: usize },
    #[error("unknown case tag {0:?} (expected a, b, c or d)")]
    UnknownCase(String),
    #[error("JSON schema violation: {0}")]
    Schema(String),
}

/// Measurement outcome label: a conclusive click `1, 2, ...` or the
/// distinguished no-click outcome `∅`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Click(u32),
    NoClick,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Click(i) => write!(f, "{i}"),
            Outcome::NoClick => write!(f, "∅"),
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = PovmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "∅" | "null" | "no-click" => Ok(Outcome::NoClick),
            other => other
                .parse::<u32>()
                .map(Outcome::Click)
                .map_err(|_| PovmError::Schema(format!("bad outcome label {other:?}"))),
        }
    }
}

/// A single POVM: outcome labels plus one PSD effect per label, with the
/// effects summing to the identity within 1e-10.
#[derive(Debug, Clone)]
pub struct Povm {
    labels: Vec<Outcome>,
    effects: Vec<HermMat>,
}

impl Povm {
    pub fn new(labels: Vec<Outcome>, effects: Vec<HermMat>) -> Result<Self, PovmError> {
        if labels.is_empty() || labels.len() != effects.len() {
            return Err(PovmError::LabelEffectMismatch);
        }
        let mut seen = BTreeSet::new();
        for &l in &labels {
            if !seen.insert(l) {
                return Err(PovmError::DuplicateLabel(l));
            }
        }
        validate_povm_effects(&effects, 1e-10)?;
        Ok(Self { labels, effects })
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Outcome] {
        &self.labels
    }

    pub fn effects(&self) -> &[HermMat] {
        &self.effects
    }

    pub fn effect(&self, label: Outcome) -> Option<&HermMat> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| &self.effects[i])
    }

    pub fn has_no_click(&self) -> bool {
        self.labels.contains(&Outcome::NoClick)
    }

    /// Conclusive (click) labels in stored order.
    pub fn conclusive_labels(&self) -> Vec<Outcome> {
        self.labels
            .iter()
            .copied()
            .filter(|l| *l != Outcome::NoClick)
            .collect()
    }
}

/// A finite collection of POVMs sharing one Hilbert-space dimension,
/// indexed by the measurement setting `y`.
#[derive(Debug, Clone)]
pub struct Assembly {
    povms: Vec<Povm>,
}

impl Assembly {
    pub fn new(povms: Vec<Povm>) -> Result<Self, PovmError> {
        if povms.is_empty() {
            return Err(PovmError::EmptyAssembly);
        }
        let dim = povms[0].dim();
        if povms.iter().any(|p| p.dim() != dim) {
            return Err(PovmError::MixedDimensions);
        }
        Ok(Self { povms })
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim()
    }

    pub fn n_settings(&self) -> usize {
        self.povms.len()
    }

    pub fn povm(&self, y: usize) -> &Povm {
        &self.povms[y]
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn is_lossy(&self) -> bool {
        self.povms.iter().all(Povm::has_no_click)
    }
}

/// The collection `G = (G_y)` of guessable-outcome subsets, one per setting.
/// The complement is always derived, never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GSpec {
    subsets: Vec<BTreeSet<Outcome>>,
}

impl GSpec {
    /// Builds a specification validated against `assembly`: one subset per
    /// setting, every label known to the corresponding POVM.
    pub fn new(subsets: Vec<BTreeSet<Outcome>>, assembly: &Assembly) -> Result<Self, PovmError> {
        if subsets.len() != assembly.n_settings() {
            return Err(PovmError::SubsetCountMismatch {
                got: subsets.len(),
                expected: assembly.n_settings(),
            });
        }
        for (y, subset) in subsets.iter().enumerate() {
            for &label in subset {
                if assembly.povm(y).effect(label).is_none() {
                    return Err(PovmError::UnknownLabel { setting: y, label });
                }
            }
        }
        Ok(Self { subsets })
    }

    pub fn n_settings(&self) -> usize {
        self.subsets.len()
    }

    pub fn subset(&self, y: usize) -> &BTreeSet<Outcome> {
        &self.subsets[y]
    }

    pub fn subsets(&self) -> &[BTreeSet<Outcome>] {
        &self.subsets
    }

    /// Complement `Ḡ_y` relative to the labels of `povm`.
    pub fn complement(&self, y: usize, povm: &Povm) -> Vec<Outcome> {
        povm.labels()
            .iter()
            .copied()
            .filter(|l| !self.subsets[y].contains(l))
            .collect()
    }

    /// Per-setting containment `self_y ⊆ other_y`.
    pub fn is_subset_of(&self, other: &GSpec) -> bool {
        self.subsets.len() == other.subsets.len()
            && self
                .subsets
                .iter()
                .zip(&other.subsets)
                .all(|(a, b)| a.is_subset(b))
    }
}

/// Detection efficiency and visibility of a lossy, noisy device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// Detection efficiency: probability of a conclusive outcome.
    pub eta: f64,
    /// Visibility of the conclusive effects. Distinct from the
    /// weak-measurement strength that parameterizes qubit strategies.
    pub nu_vis: f64,
}

impl LossParams {
    pub fn new(eta: f64, nu_vis: f64) -> Result<Self, PovmError> {
        if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
            return Err(PovmError::OutOfRange {
                name: "eta",
                value: eta,
            });
        }
        if !(0.0..=1.0).contains(&nu_vis) || !nu_vis.is_finite() {
            return Err(PovmError::OutOfRange {
                name: "nu_vis",
                value: nu_vis,
            });
        }
        Ok(Self { eta, nu_vis })
    }
}

/// Projective qubit assembly along the given unit Bloch directions, with
/// outcome labels `1` (the `+r` projector) and `2` (the `-r` projector).
pub fn qubit_assembly(directions: &[BlochVec]) -> Result<Assembly, PovmError> {
    if directions.is_empty() {
        return Err(PovmError::EmptyAssembly);
    }
    let povms = directions
        .iter()
        .map(|r| {
            Povm::new(
                vec![Outcome::Click(1), Outcome::Click(2)],
                vec![bloch_projector(r, 1)?, bloch_projector(r, -1)?],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Assembly::new(povms)
}

/// Qubit assembly `{(sin a_y, 0, cos a_y)}` from x-z plane angles; the
/// family `{Z, cos θ Z + sin θ X, ...}`.
pub fn qubit_assembly_from_angles(angles: &[f64]) -> Result<Assembly, PovmError> {
    let dirs: Vec<BlochVec> = angles.iter().map(|&a| BlochVec::xz_plane(a)).collect();
    qubit_assembly(&dirs)
}

/// Lossy transform: every conclusive effect scaled by `eta`, plus a
/// no-click effect `(1-eta) I`. Double application is an error.
pub fn apply_loss(a: &Assembly, eta: f64) -> Result<Assembly, PovmError> {
    apply_loss_visibility(a, LossParams::new(eta, 1.0)?)
}

/// Combined loss and finite-visibility transform: conclusive effects become
/// `eta*nu*B + eta*(1-nu)*t_b I` with `t_b = Tr(B)/Tr(I)`, and the no-click
/// effect is `(1-eta) I`.
pub fn apply_loss_visibility(a: &Assembly, p: LossParams) -> Result<Assembly, PovmError> {
    let dim = a.dim();
    let povms = a
        .povms()
        .iter()
        .map(|povm| {
            if povm.has_no_click() {
                return Err(PovmError::AlreadyLossy);
            }
            let mut labels = povm.labels().to_vec();
            let mut effects: Vec<HermMat> = povm
                .effects()
                .iter()
                .map(|b| {
                    let t = b.trace() / dim as f64;
                    b.scale(p.eta * p.nu_vis)
                        .add(&HermMat::scaled_identity(dim, p.eta * (1.0 - p.nu_vis) * t))
                })
                .collect();
            labels.push(Outcome::NoClick);
            effects.push(HermMat::scaled_identity(dim, 1.0 - p.eta));
            Povm::new(labels, effects)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Assembly::new(povms)
}

/// The four guessable-subset families for a lossy assembly:
///
/// - `A` (full): every outcome of every setting, no-click included.
/// - `B` (partial input): every outcome of the first setting only.
/// - `C` (partial outcome): the conclusive outcomes of every setting.
/// - `D` (partial input & outcome): the conclusive outcomes of the first
///   setting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GCase {
    A,
    B,
    C,
    D,
}

impl fmt::Display for GCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            GCase::A => "a",
            GCase::B => "b",
            GCase::C => "c",
            GCase::D => "d",
        };
        write!(f, "{c}")
    }
}

impl std::str::FromStr for GCase {
    type Err = PovmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(GCase::A),
            "b" => Ok(GCase::B),
            "c" => Ok(GCase::C),
            "d" => Ok(GCase::D),
            other => Err(PovmError::UnknownCase(other.into())),
        }
    }
}

/// Builds the guessable-subset family of the given case for a lossy
/// assembly.
pub fn gspec_case(case: GCase, a: &Assembly) -> Result<GSpec, PovmError> {
    if !a.is_lossy() {
        return Err(PovmError::NotLossy);
    }
    let all = |y: usize| -> BTreeSet<Outcome> { a.povm(y).labels().iter().copied().collect() };
    let conclusive =
        |y: usize| -> BTreeSet<Outcome> { a.povm(y).conclusive_labels().into_iter().collect() };
    let empty = BTreeSet::new;
    let subsets: Vec<BTreeSet<Outcome>> = (0..a.n_settings())
        .map(|y| match case {
            GCase::A => all(y),
            GCase::B => {
                if y == 0 {
                    all(y)
                } else {
                    empty()
                }
            }
            GCase::C => conclusive(y),
            GCase::D => {
                if y == 0 {
                    conclusive(y)
                } else {
                    empty()
                }
            }
        })
        .collect();
    GSpec::new(subsets, a)
}

/// Enumerates the deterministic-response tuples `β̄ = (β_1, ..., β_n)` with
/// `β_y ∈ G_y`, using `None` as the placeholder where `G_y` is empty. The
/// order is lexicographic in the per-setting sorted label order.
pub fn beta_tuples(g: &GSpec) -> Vec<Vec<Option<Outcome>>> {
    beta_tuples_from(g.subsets())
}

/// [`beta_tuples`] on raw subsets.
pub fn beta_tuples_from(subsets: &[BTreeSet<Outcome>]) -> Vec<Vec<Option<Outcome>>> {
    let per_setting: Vec<Vec<Option<Outcome>>> = subsets
        .iter()
        .map(|s| {
            if s.is_empty() {
                vec![None]
            } else {
                s.iter().map(|&o| Some(o)).collect()
            }
        })
        .collect();
    let mut tuples = vec![Vec::new()];
    for options in &per_setting {
        let mut next = Vec::with_capacity(tuples.len() * options.len());
        for t in &tuples {
            for &o in options {
                let mut t2 = t.clone();
                t2.push(o);
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples
}

// ---------------------------------------------------------------------------
// JSON serialization
//
// Schema (field names fixed for CLI round-tripping):
//   { "dim": d, "settings": [ { "labels": ["1", "2", "∅"],
//       "effects": [ [[ [re, im], ... ], ...], ... ] } ] }
// Each effect is a dim x dim matrix in row-major order with entries as
// [re, im] pairs.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AssemblyJson {
    dim: usize,
    settings: Vec<SettingJson>,
}

#[derive(Serialize, Deserialize)]
struct SettingJson {
    labels: Vec<String>,
    effects: Vec<Vec<Vec<[f64; 2]>>>,
}

pub(crate) fn herm_to_rows(m: &HermMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.dim())
        .map(|i| {
            (0..m.dim())
                .map(|j| {
                    let z = m.entry(i, j);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

pub(crate) fn herm_from_rows(rows: &[Vec<[f64; 2]>], dim: usize) -> Result<HermMat, PovmError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(PovmError::Schema(format!("effect is not {dim}x{dim}")));
    }
    let mut m = crate::matqm::CplxMat::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = C64::new(re, im);
        }
    }
    HermMat::new(m).map_err(PovmError::from)
}

impl Assembly {
    pub fn to_json(&self) -> String {
        let doc = AssemblyJson {
            dim: self.dim(),
            settings: self
                .povms
                .iter()
                .map(|p| SettingJson {
                    labels: p.labels().iter().map(|l| l.to_string()).collect(),
                    effects: p.effects().iter().map(herm_to_rows).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("assembly serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, PovmError> {
        let doc: AssemblyJson =
            serde_json::from_str(text).map_err(|e| PovmError::Schema(e.to_string()))?;
        let povms = doc
            .settings
            .iter()
            .map(|s| {
                let labels = s
                    .labels
                    .iter()
                    .map(|l| l.parse::<Outcome>())
                    .collect::<Result<Vec<_>, _>>()?;
                let effects = s
                    .effects
                    .iter()
                    .map(|rows| herm_from_rows(rows, doc.dim))
                    .collect::<Result<Vec<_>, _>>()?;
                Povm::new(labels, effects)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Assembly::new(povms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matqm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qubit_assembly_z_and_x() {
        let a = qubit_assembly(&[BlochVec::Z]).unwrap();
        assert_eq!(a.n_settings(), 1);
        let p = a.povm(0);
        assert!(
            p.effect(Outcome::Click(1))
                .unwrap()
                .max_abs_diff(&HermMat::from_diagonal(&[1.0, 0.0]))
                < 1e-14
        );
        assert!(
            p.effect(Outcome::Click(2))
                .unwrap()
                .max_abs_diff(&HermMat::from_diagonal(&[0.0, 1.0]))
                < 1e-14
        );

        let a = qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap();
        assert_eq!(a.n_settings(), 2);
        // both effects of every setting are rank one
        for y in 0..2 {
            for eff in a.povm(y).effects() {
                let eigs = eff.eigvalsh();
                assert!(eigs[0].abs() < 1e-12 && (eigs[1] - 1.0).abs() < 1e-12);
            }
        }
        assert!(qubit_assembly(&[]).is_err());
    }

    #[test]
    fn apply_loss_endpoints() {
        let a = qubit_assembly(&[BlochVec::Z]).unwrap();
        let full = apply_loss(&a, 1.0).unwrap();
        assert!(
            full.povm(0)
                .effect(Outcome::Click(1))
                .unwrap()
                .max_abs_diff(&HermMat::from_diagonal(&[1.0, 0.0]))
                < 1e-14
        );
        assert!(full.povm(0).effect(Outcome::NoClick).unwrap().max_abs() < 1e-14);

        let dark = apply_loss(&a, 0.0).unwrap();
        assert!(dark.povm(0).effect(Outcome::Click(1)).unwrap().max_abs() < 1e-14);
        assert!(
            dark.povm(0)
                .effect(Outcome::NoClick)
                .unwrap()
                .max_abs_diff(&HermMat::identity(2))
                < 1e-14
        );

        let half = apply_loss(&a, 0.5).unwrap();
        assert!(
            half.povm(0)
                .effect(Outcome::Click(1))
                .unwrap()
                .max_abs_diff(&HermMat::from_diagonal(&[0.5, 0.0]))
                < 1e-14
        );
        assert!(
            half.povm(0)
                .effect(Outcome::NoClick)
                .unwrap()
                .max_abs_diff(&HermMat::scaled_identity(2, 0.5))
                < 1e-14
        );
    }

    #[test]
    fn apply_loss_rejects_double_application() {
        let a = qubit_assembly(&[BlochVec::Z]).unwrap();
        let lossy = apply_loss(&a, 0.7).unwrap();
        assert!(matches!(
            apply_loss(&lossy, 0.7),
            Err(PovmError::AlreadyLossy)
        ));
    }

    #[test]
    fn visibility_reduces_to_loss_and_depolarizes() {
        let a = qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap();
        let plain = apply_loss(&a, 0.8).unwrap();
        let vis1 = apply_loss_visibility(&a, LossParams::new(0.8, 1.0).unwrap()).unwrap();
        for y in 0..2 {
            for (e1, e2) in plain.povm(y).effects().iter().zip(vis1.povm(y).effects()) {
                assert!(e1.max_abs_diff(e2) < 1e-14);
            }
        }
        // eta = 1, nu = 0 on projective qubit effects: every conclusive
        // effect collapses to I/2
        let vis0 = apply_loss_visibility(&a, LossParams::new(1.0, 0.0).unwrap()).unwrap();
        for y in 0..2 {
            for label in [Outcome::Click(1), Outcome::Click(2)] {
                assert!(
                    vis0.povm(y)
                        .effect(label)
                        .unwrap()
                        .max_abs_diff(&HermMat::scaled_identity(2, 0.5))
                        < 1e-14
                );
            }
        }
    }

    #[test]
    fn visibility_formula_and_completeness() {
        let a = qubit_assembly(&[BlochVec::Z]).unwrap();
        let out = apply_loss_visibility(&a, LossParams::new(0.8, 0.9).unwrap()).unwrap();
        let expect = HermMat::from_diagonal(&[1.0, 0.0])
            .scale(0.8 * 0.9)
            .add(&HermMat::scaled_identity(2, 0.8 * 0.1 * 0.5));
        assert!(
            out.povm(0)
                .effect(Outcome::Click(1))
                .unwrap()
                .max_abs_diff(&expect)
                < 1e-14
        );
        // completeness is preserved exactly
        let mut sum = HermMat::zeros(2);
        for e in out.povm(0).effects() {
            sum = sum.add(e);
        }
        assert!(sum.max_abs_diff(&HermMat::identity(2)) < 1e-12);
    }

    #[test]
    fn loss_is_affine_in_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let dirs: Vec<BlochVec> = (0..3).map(|_| matqm::random_unit_bloch(&mut rng)).collect();
            let a = qubit_assembly(&dirs).unwrap();
            let eta: f64 = rng.gen_range(0.0..1.0);
            let b_eta = apply_loss(&a, eta).unwrap();
            let b_one = apply_loss(&a, 1.0).unwrap();
            let b_zero = apply_loss(&a, 0.0).unwrap();
            for y in 0..a.n_settings() {
                for (label, eff) in b_eta.povm(y).labels().iter().zip(b_eta.povm(y).effects()) {
                    let combo = b_one
                        .povm(y)
                        .effect(*label)
                        .unwrap()
                        .scale(eta)
                        .add(&b_zero.povm(y).effect(*label).unwrap().scale(1.0 - eta));
                    assert!(eff.max_abs_diff(&combo) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gspec_cases_match_table() {
        let a = apply_loss(&qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap(), 0.5).unwrap();
        let one = Outcome::Click(1);
        let two = Outcome::Click(2);
        let nc = Outcome::NoClick;

        let ga = gspec_case(GCase::A, &a).unwrap();
        for y in 0..2 {
            assert_eq!(ga.subset(y), &BTreeSet::from([one, two, nc]));
        }
        let gc = gspec_case(GCase::C, &a).unwrap();
        for y in 0..2 {
            assert_eq!(gc.subset(y), &BTreeSet::from([one, two]));
        }
        let gd = gspec_case(GCase::D, &a).unwrap();
        assert_eq!(gd.subset(0), &BTreeSet::from([one, two]));
        assert!(gd.subset(1).is_empty());
        let gb = gspec_case(GCase::B, &a).unwrap();
        assert_eq!(gb.subset(0), &BTreeSet::from([one, two, nc]));
        assert!(gb.subset(1).is_empty());

        // Observation-1 preorder containments
        assert!(gd.is_subset_of(&gb));
        assert!(gd.is_subset_of(&gc));
        assert!(gc.is_subset_of(&ga));
        assert!(gb.is_subset_of(&ga));
    }

    #[test]
    fn gspec_case_requires_lossy() {
        let a = qubit_assembly(&[BlochVec::Z]).unwrap();
        assert!(matches!(gspec_case(GCase::A, &a), Err(PovmError::NotLossy)));
    }

    #[test]
    fn beta_tuple_counts() {
        let a = apply_loss(&qubit_assembly(&[BlochVec::Z, BlochVec::X]).unwrap(), 0.5).unwrap();
        assert_eq!(beta_tuples(&gspec_case(GCase::A, &a).unwrap()).len(), 9);
        assert_eq!(beta_tuples(&gspec_case(GCase::B, &a).unwrap()).len(), 3);
        assert_eq!(beta_tuples(&gspec_case(GCase::C, &a).unwrap()).len(), 4);
        assert_eq!(beta_tuples(&gspec_case(GCase::D, &a).unwrap()).len(), 2);
        let gd = gspec_case(GCase::D, &a).unwrap();
        for t in beta_tuples(&gd) {
            assert!(t[0].is_some() && t[1].is_none());
        }
    }

    #[test]
    fn json_round_trip() {
        let a = apply_loss(
            &qubit_assembly(&[BlochVec::Z, BlochVec::xz_plane(1.1)]).unwrap(),
            0.73,
        )
        .unwrap();
        let text = a.to_json();
        let b = Assembly::from_json(&text).unwrap();
        assert_eq!(a.n_settings(), b.n_settings());
        for y in 0..a.n_settings() {
            assert_eq!(a.povm(y).labels(), b.povm(y).labels());
            for (e1, e2) in a.povm(y).effects().iter().zip(b.povm(y).effects()) {
                assert!(e1.max_abs_diff(e2) == 0.0);
            }
        }
    }

    #[test]
    fn json_rejects_garbage() {
        assert!(Assembly::from_json("{\"dim\": 2}").is_err());
        assert!(Assembly::from_json("not json").is_err());
    }
}
