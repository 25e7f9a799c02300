//! Adversarial simulation strategies: a quantum instrument on the incoming
//! state, conditional measurements keyed by the instrument outcome, a
//! response table over the guessable outcomes, and the guess function.
//!
//! A strategy reproduces a lossy assembly when the effective operators
//! `I_c†(M_{b|y,c})` sum to the lossy effects; it witnesses partial joint
//! measurability when additionally the guessable-outcome blocks are scalar
//! multiples of a common positive operator per `(y, c)`, which makes the
//! outcome predictable from the classical record `c`. [`verify_strategy`]
//! checks all of this as operator identities and reports residuals;
//! constructors in this module build the strategies that saturate the
//! analytic efficiency thresholds.

mod convert;
mod generic;
mod qubit;
mod verify;

pub use convert::{pp_to_strategy, randomize_to_deterministic, PartialParent, PpResiduals};
pub use generic::{
    case_d_reversal_margins, strat_case_d_generic, strat_full_jm, strat_partial_input,
    strat_partial_outcome_generic,
};
pub use qubit::{qubit_case_c_optimal_params, strat_qubit_case_c, strat_qubit_case_d};
pub use verify::verify_strategy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matqm::{CplxMat, HermMat, MatError, C64};
use crate::povm::{Outcome, PovmError};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error("instrument is not trace preserving: deviation {0:.3e}")]
    NotTracePreserving(f64),
    #[error("instrument has no outcomes or inconsistent Kraus shapes")]
    MalformedInstrument,
    #[error("strategy shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("efficiency {eta} exceeds the strategy bound {bound}")]
    BoundViolated { eta: f64, bound: f64 },
    #[error("reversal instrument invalid at eta = {eta}: requires eta <= {bound}")]
    ReversalInvalid { eta: f64, bound: f64 },
    #[error("validity constraints violated: {}", format_violations(.violations))]
    ValidityViolated { violations: Vec<(String, f64)> },
    #[error("operator not supported on the instrument outcome support (deviation {0:.3e})")]
    SupportViolation(f64),
    #[error("response row (y={y}, c={c}) sums to {sum}, expected 1")]
    ResponseNotNormalized { y: usize, c: usize, sum: f64 },
    #[error("strategies require the same conclusive labels on every setting")]
    NonUniformLabels,
    #[error("JSON schema violation: {0}")]
    Schema(String),
}

fn format_violations(v: &[(String, f64)]) -> String {
    v.iter()
        .map(|(name, bound)| format!("{name} <= {bound:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Quantum instrument: for each classical outcome `c` a completely positive
/// map given by Kraus operators (possibly rectangular, mapping the input
/// space into an extended output space), with `Σ_c Σ_K K†K = I` on the
/// input space.
#[derive(Debug, Clone)]
pub struct Instrument {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<Vec<CplxMat>>,
}

impl Instrument {
    pub fn new(kraus: Vec<Vec<CplxMat>>) -> Result<Self, StrategyError> {
        let first = kraus
            .first()
            .and_then(|ks| ks.first())
            .ok_or(StrategyError::MalformedInstrument)?;
        let (out_dim, in_dim) = (first.nrows(), first.ncols());
        if kraus
            .iter()
            .flatten()
            .any(|k| k.nrows() != out_dim || k.ncols() != in_dim)
        {
            return Err(StrategyError::MalformedInstrument);
        }
        let mut total = CplxMat::zeros(in_dim, in_dim);
        for k in kraus.iter().flatten() {
            total += k.adjoint() * k;
        }
        let dev = HermMat::new(total)?.max_abs_diff(&HermMat::identity(in_dim));
        if dev > 1e-10 {
            return Err(StrategyError::NotTracePreserving(dev));
        }
        Ok(Self {
            in_dim,
            out_dim,
            kraus,
        })
    }

    pub fn n_outcomes(&self) -> usize {
        self.kraus.len()
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self, c: usize) -> &[CplxMat] {
        &self.kraus[c]
    }

    /// Heisenberg-picture action `I_c†(M) = Σ_K K† M K`, mapping an
    /// operator on the output space back to the input space.
    pub fn apply_adjoint(&self, c: usize, m: &HermMat) -> HermMat {
        let mut acc = CplxMat::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus[c] {
            acc += k.adjoint() * m.as_matrix() * k;
        }
        HermMat::new(acc).expect("adjoint action preserves hermiticity")
    }

    /// The induced POVM element `E_c = I_c†(I)`.
    pub fn povm_element(&self, c: usize) -> HermMat {
        self.apply_adjoint(c, &HermMat::identity(self.out_dim))
    }

    /// Schrödinger-picture action `I_c(ρ) = Σ_K K ρ K†` (unnormalized).
    pub fn apply(&self, c: usize, rho: &HermMat) -> HermMat {
        let mut acc = CplxMat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus[c] {
            acc += k * rho.as_matrix() * k.adjoint();
        }
        HermMat::new(acc).expect("channel action preserves hermiticity")
    }

    /// Output-side Gram operator `Σ_K K K†`; its support carries every
    /// post-measurement state of outcome `c`.
    pub fn output_gram(&self, c: usize) -> HermMat {
        let mut acc = CplxMat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus[c] {
            acc += k * k.adjoint();
        }
        HermMat::new(acc).expect("gram is Hermitian")
    }
}

/// Labeled effects without a completeness requirement: conditional
/// measurements may be complete only on the support of the instrument
/// outcome.
#[derive(Debug, Clone)]
pub struct EffectSet {
    labels: Vec<Outcome>,
    effects: Vec<HermMat>,
}

impl EffectSet {
    pub fn new(labels: Vec<Outcome>, effects: Vec<HermMat>) -> Result<Self, StrategyError> {
        if labels.is_empty() || labels.len() != effects.len() {
            return Err(StrategyError::ShapeMismatch(
                "labels and effects must have equal nonzero length".into(),
            ));
        }
        let dim = effects[0].dim();
        for (l, e) in labels.iter().zip(&effects) {
            if e.dim() != dim {
                return Err(StrategyError::ShapeMismatch(format!(
                    "effect {l} has dimension {} != {dim}",
                    e.dim()
                )));
            }
        }
        Ok(Self { labels, effects })
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
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

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, &HermMat)> {
        self.labels.iter().copied().zip(self.effects.iter())
    }
}

/// Response table `p(b|y,c)` over the guessable outcomes, one row per
/// `(y, c)`; rows are empty where the guessable subset is empty.
pub type ResponseTable = Vec<Vec<BTreeMap<Outcome, f64>>>;

/// A full adversarial simulation: instrument, conditional measurements,
/// response table, and (when deterministic) the guess function.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub instrument: Instrument,
    /// Conditional measurements indexed `[setting][instrument outcome]`.
    pub conditionals: Vec<Vec<EffectSet>>,
    pub response: ResponseTable,
    /// Guess per `(setting, instrument outcome)`; `None` where no guess is
    /// needed (empty guessable subset).
    pub guess: Vec<Vec<Option<Outcome>>>,
}

impl Strategy {
    pub fn new(
        instrument: Instrument,
        conditionals: Vec<Vec<EffectSet>>,
        response: ResponseTable,
        guess: Vec<Vec<Option<Outcome>>>,
    ) -> Result<Self, StrategyError> {
        let n_c = instrument.n_outcomes();
        let n_settings = conditionals.len();
        if n_settings == 0 {
            return Err(StrategyError::ShapeMismatch("no settings".into()));
        }
        if conditionals.iter().any(|row| row.len() != n_c)
            || response.len() != n_settings
            || response.iter().any(|row| row.len() != n_c)
            || guess.len() != n_settings
            || guess.iter().any(|row| row.len() != n_c)
        {
            return Err(StrategyError::ShapeMismatch(format!(
                "expected {n_settings} settings x {n_c} instrument outcomes"
            )));
        }
        for row in &conditionals {
            for es in row {
                if es.dim() != instrument.out_dim() {
                    return Err(StrategyError::ShapeMismatch(format!(
                        "conditional effects on dim {} but instrument output is {}",
                        es.dim(),
                        instrument.out_dim()
                    )));
                }
            }
        }
        for (y, row) in response.iter().enumerate() {
            for (c, p) in row.iter().enumerate() {
                if !p.is_empty() {
                    let sum: f64 = p.values().sum();
                    if (sum - 1.0).abs() > 1e-9 || p.values().any(|&v| v < -1e-12) {
                        return Err(StrategyError::ResponseNotNormalized { y, c, sum });
                    }
                }
            }
        }
        Ok(Self {
            instrument,
            conditionals,
            response,
            guess,
        })
    }

    pub fn n_settings(&self) -> usize {
        self.conditionals.len()
    }

    /// Effective operator `E_{c,b|y} = I_c†(M_{b|y,c})` on the input space.
    pub fn effective_operator(&self, y: usize, c: usize, b: Outcome) -> Option<HermMat> {
        self.conditionals[y][c]
            .effect(b)
            .map(|m| self.instrument.apply_adjoint(c, m))
    }

    /// Recasts the strategy as its effective partial-parent operators.
    pub fn to_partial_parent(
        &self,
        subsets: &[std::collections::BTreeSet<Outcome>],
    ) -> PartialParent {
        let n_c = self.instrument.n_outcomes();
        let labels: Vec<Vec<Outcome>> = self
            .conditionals
            .iter()
            .map(|row| row[0].labels().to_vec())
            .collect();
        let blocks: Vec<Vec<Vec<HermMat>>> = (0..n_c)
            .map(|c| {
                (0..self.n_settings())
                    .map(|y| {
                        labels[y]
                            .iter()
                            .map(|&b| self.effective_operator(y, c, b).expect("label present"))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        PartialParent {
            dim: self.instrument.in_dim(),
            labels,
            subsets: subsets.to_vec(),
            blocks,
            response: self.response.clone(),
        }
    }
}

/// Residuals and margins of the Def.-style operator checks; `passes` iff
/// every residual is at or below the tolerance and no operator dips below
/// `-tol` on the PSD side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Reconstruction of the lossy effects, `max |Σ_c E_{c,b|y} - B_{b|y}|`.
    pub consistency_residual: f64,
    /// Setting independence of the marginals, `max |Σ_b E_{c,b|y} - E_c|`.
    pub nosignaling_residual: f64,
    /// Proportionality of guessable blocks to the star operator with the
    /// extracted response.
    pub partial_jm_residual: f64,
    /// Worst-case probability, over settings and input states, that a
    /// guessable outcome occurs and differs from the guess.
    pub guess_failure_prob: f64,
    /// Completeness of the conditional measurements on the instrument
    /// output support.
    pub completeness_residual: f64,
    /// Per-operator smallest eigenvalues (PSD margins), labeled.
    pub validity: Vec<(String, f64)>,
}

impl VerificationReport {
    pub fn min_psd_margin(&self) -> f64 {
        self.validity
            .iter()
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.consistency_residual <= tol
            && self.nosignaling_residual <= tol
            && self.partial_jm_residual <= tol
            && self.guess_failure_prob <= tol
            && self.completeness_residual <= tol
            && self.min_psd_margin() >= -tol
    }
}

// ---------------------------------------------------------------------------
// JSON serialization of strategies, mirroring the assembly schema: matrices
// are row-major with [re, im] entries; outcome labels are strings.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StrategyJson {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    conditionals: Vec<Vec<EffectSetJson>>,
    response: Vec<Vec<BTreeMap<String, f64>>>,
    guess: Vec<Vec<Option<String>>>,
}

#[derive(Serialize, Deserialize)]
struct EffectSetJson {
    labels: Vec<String>,
    effects: Vec<Vec<Vec<[f64; 2]>>>,
}

fn cplx_to_rows(m: &CplxMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn cplx_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CplxMat, StrategyError> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(StrategyError::Schema("ragged or empty matrix".into()));
    }
    let mut m = CplxMat::zeros(nr, nc);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

impl Strategy {
    pub fn to_json(&self) -> String {
        let doc = StrategyJson {
            in_dim: self.instrument.in_dim(),
            out_dim: self.instrument.out_dim(),
            kraus: self
                .instrument
                .kraus
                .iter()
                .map(|ks| ks.iter().map(cplx_to_rows).collect())
                .collect(),
            conditionals: self
                .conditionals
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|es| EffectSetJson {
                            labels: es.labels().iter().map(|l| l.to_string()).collect(),
                            effects: es
                                .effects()
                                .iter()
                                .map(|e| cplx_to_rows(e.as_matrix()))
                                .collect(),
                        })
                        .collect()
                })
                .collect(),
            response: self
                .response
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|p| p.iter().map(|(k, v)| (k.to_string(), *v)).collect())
                        .collect()
                })
                .collect(),
            guess: self
                .guess
                .iter()
                .map(|row| row.iter().map(|g| g.map(|o| o.to_string())).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("strategy serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, StrategyError> {
        let doc: StrategyJson =
            serde_json::from_str(text).map_err(|e| StrategyError::Schema(e.to_string()))?;
        let kraus = doc
            .kraus
            .iter()
            .map(|ks| {
                ks.iter()
                    .map(|m| cplx_from_rows(m))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let instrument = Instrument::new(kraus)?;
        let parse_label = |s: &str| -> Result<Outcome, StrategyError> {
            s.parse::<Outcome>()
                .map_err(|e| StrategyError::Schema(e.to_string()))
        };
        let conditionals = doc
            .conditionals
            .iter()
            .map(|row| {
                row.iter()
                    .map(|es| {
                        let labels = es
                            .labels
                            .iter()
                            .map(|l| parse_label(l))
                            .collect::<Result<Vec<_>, _>>()?;
                        let effects = es
                            .effects
                            .iter()
                            .map(|m| Ok(HermMat::new(cplx_from_rows(m)?)?))
                            .collect::<Result<Vec<_>, StrategyError>>()?;
                        EffectSet::new(labels, effects)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let response = doc
            .response
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| {
                        p.iter()
                            .map(|(k, v)| Ok((parse_label(k)?, *v)))
                            .collect::<Result<BTreeMap<_, _>, StrategyError>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let guess = doc
            .guess
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| g.as_deref().map(parse_label).transpose())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Strategy::new(instrument, conditionals, response, guess)
    }
}
