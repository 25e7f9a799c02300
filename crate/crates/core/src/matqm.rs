//! Dense complex-Hermitian matrix utilities and qubit/Bloch helpers.
//!
//! Everything here is value-semantic and pure: matrices are small (dim <= 12
//! in practice), stored dense, and copied on assignment. [`HermMat`] carries
//! the invariant that the stored matrix equals its own adjoint exactly, which
//! is enforced by symmetrizing `(M + M†)/2` entrywise at construction time.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// General dense complex matrix (Kraus operators, isometries, ...).
///
/// No invariant beyond shape consistency; Hermitian operators use
/// [`HermMat`] instead.
pub type CplxMat = DMatrix<C64>;

/// Entrywise hygiene tolerance used at construction time.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// Default tolerance for spectral decisions (PSD checks and the like).
pub const DECISION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension must be >= 1")]
    EmptyMatrix,
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
    #[error("Bloch vector must have unit norm, got |r| = {norm}")]
    NotUnitBloch { norm: f64 },
    #[error("not a valid POVM: {reason}")]
    InvalidPovm { reason: String },
    #[error("dimension mismatch: {context}")]
    DimMismatch { context: String },
}

/// Hermitian matrix with the equality `M = M†` holding exactly entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMat {
    m: DMatrix<C64>,
}

impl HermMat {
    /// Builds a Hermitian matrix by symmetrizing `(m + m†)/2`.
    ///
    /// The input is expected to be Hermitian up to numerical noise; the
    /// symmetrization makes the invariant exact (diagonal imaginary parts
    /// become exactly zero and off-diagonal pairs exactly conjugate).
    pub fn new(m: DMatrix<C64>) -> Result<Self, MatError> {
        if m.nrows() != m.ncols() {
            return Err(MatError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(MatError::EmptyMatrix);
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m: sym })
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// `s * I` for a real scale `s`.
    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self {
            m: DMatrix::identity(dim, dim).scale(s),
        }
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            m: DMatrix::from_diagonal(&d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Trace; exactly real because the diagonal is exactly real.
    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// Largest entrywise deviation `max_ij |self_ij - other_ij|`.
    pub fn max_abs_diff(&self, other: &HermMat) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff: dimension mismatch");
        (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &HermMat) -> HermMat {
        HermMat {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &HermMat) -> HermMat {
        HermMat {
            m: &self.m - &other.m,
        }
    }

    pub fn scale(&self, s: f64) -> HermMat {
        HermMat { m: self.m.scale(s) }
    }

    /// `A · self · A†`, Hermitian for any (possibly rectangular) `A`.
    pub fn sandwich(&self, a: &CplxMat) -> HermMat {
        let prod = a * &self.m * a.adjoint();
        HermMat::new(prod).expect("sandwich of a Hermitian matrix is Hermitian")
    }

    /// Kronecker product; Hermitian since both factors are.
    pub fn kron(&self, other: &HermMat) -> HermMat {
        HermMat::new(self.m.kronecker(&other.m)).expect("kron of Hermitian is Hermitian")
    }

    /// `Tr[self · other]`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermMat) -> f64 {
        (&self.m * &other.m).diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues and eigenvectors, eigenvalues sorted ascending.
    ///
    /// Returns `(values, vectors)` with `vectors` column `i` the eigenvector
    /// of `values[i]`.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        let se = self.m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(self.dim(), self.dim());
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &se.eigenvectors.column(i));
        }
        (values, vectors)
    }

    /// Eigenvalues only, sorted ascending.
    pub fn eigvalsh(&self) -> Vec<f64> {
        let se = self.m.clone().symmetric_eigen();
        let mut v: Vec<f64> = se.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigvalsh()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigvalsh().last().expect("dim >= 1")
    }

    /// Applies a real function to the spectrum: `U f(Λ) U†`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermMat {
        let (vals, vecs) = self.eigh();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&l| C64::new(f(l), 0.0)),
        ));
        let m = &vecs * diag * vecs.adjoint();
        HermMat::new(m).expect("spectral map preserves hermiticity")
    }
}

/// Unit vector on (or inside) the Bloch sphere; components are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const X: BlochVec = BlochVec {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: BlochVec = BlochVec {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: BlochVec = BlochVec {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub fn dot(&self, other: &BlochVec) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> BlochVec {
        BlochVec::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(&self, other: &BlochVec) -> BlochVec {
        BlochVec::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn cross(&self, other: &BlochVec) -> BlochVec {
        BlochVec::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn normalized(&self) -> Result<BlochVec, MatError> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(MatError::NotUnitBloch { norm: n });
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Direction in the x-z plane at angle `alpha` from +z, the family
    /// `(sin a, 0, cos a)`.
    pub fn xz_plane(alpha: f64) -> BlochVec {
        BlochVec::new(alpha.sin(), 0.0, alpha.cos())
    }

    /// `r · σ` as a Hermitian matrix.
    pub fn dot_sigma(&self) -> HermMat {
        let c = C64::new;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(self.z, 0.0),
                c(self.x, -self.y),
                c(self.x, self.y),
                c(-self.z, 0.0),
            ],
        );
        HermMat::new(m).expect("r·σ is Hermitian")
    }
}

/// True iff the smallest eigenvalue of `m` is at least `-tol`.
pub fn is_psd(m: &HermMat, tol: f64) -> bool {
    m.min_eigenvalue() >= -tol
}

/// PSD square root `S` with `S·S = m`; eigenvalues below 1e-12 are clamped
/// to zero before taking the root.
pub fn herm_sqrt(m: &HermMat) -> Result<HermMat, MatError> {
    let min_eig = m.min_eigenvalue();
    if min_eig < -1e-10 {
        return Err(MatError::NotPsd { min_eig });
    }
    Ok(m.spectral_map(|l| if l < CONSTRUCTION_TOL { 0.0 } else { l.sqrt() }))
}

/// Moore-Penrose pseudo-inverse of the square root, `m^{-1/2}` on the
/// support of `m`; eigenvalues at or below `rank_tol` are treated as kernel.
pub fn pinv_sqrt(m: &HermMat, rank_tol: f64) -> Result<HermMat, MatError> {
    let min_eig = m.min_eigenvalue();
    if min_eig < -1e-10 {
        return Err(MatError::NotPsd { min_eig });
    }
    Ok(m.spectral_map(|l| if l <= rank_tol { 0.0 } else { 1.0 / l.sqrt() }))
}

/// Projector onto the support of `m` (eigenvalues above `rank_tol`).
pub fn support_projector(m: &HermMat, rank_tol: f64) -> Result<HermMat, MatError> {
    let min_eig = m.min_eigenvalue();
    if min_eig < -1e-10 {
        return Err(MatError::NotPsd { min_eig });
    }
    Ok(m.spectral_map(|l| if l <= rank_tol { 0.0 } else { 1.0 }))
}

/// Rank-one projector `(I + sign * r·σ)/2` onto the `±r` hemisphere.
pub fn bloch_projector(r: &BlochVec, sign: i8) -> Result<HermMat, MatError> {
    if !r.is_unit(CONSTRUCTION_TOL) {
        return Err(MatError::NotUnitBloch { norm: r.norm() });
    }
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    Ok(HermMat::identity(2).add(&r.dot_sigma().scale(s)).scale(0.5))
}

/// Validates that `effects` form a POVM: each PSD within `tol` and the sum
/// equal to the identity within `tol` entrywise.
pub fn validate_povm_effects(effects: &[HermMat], tol: f64) -> Result<(), MatError> {
    if effects.is_empty() {
        return Err(MatError::InvalidPovm {
            reason: "no effects".into(),
        });
    }
    let dim = effects[0].dim();
    let mut sum = HermMat::zeros(dim);
    for (i, e) in effects.iter().enumerate() {
        if e.dim() != dim {
            return Err(MatError::InvalidPovm {
                reason: format!("effect {i} has dimension {} != {dim}", e.dim()),
            });
        }
        let min_eig = e.min_eigenvalue();
        if min_eig < -tol {
            return Err(MatError::InvalidPovm {
                reason: format!("effect {i} has negative eigenvalue {min_eig:.3e}"),
            });
        }
        sum = sum.add(e);
    }
    let dev = sum.max_abs_diff(&HermMat::identity(dim));
    if dev > tol {
        return Err(MatError::InvalidPovm {
            reason: format!("effects sum deviates from identity by {dev:.3e}"),
        });
    }
    Ok(())
}

/// Canonical square-root Naimark dilation of a POVM.
///
/// For a POVM `{B_b}` of `k` effects on dimension `d`, returns `k` mutually
/// orthogonal projectors `{P_b}` on the extended space `C^d ⊗ C^k` (ancilla
/// second, initialized to `|0>`), together with the extension dimension
/// `d*k`. Statistics are reproduced in the sense
/// `Tr[ρ B_b] = Tr[(ρ ⊗ |0><0|) P_b]`, and more strongly the compression
/// identity `V† P_b V = B_b` holds for the embedding isometry
/// `V = I ⊗ |0>` (see [`embedding_isometry`]).
pub fn naimark_dilate(povm: &[HermMat]) -> Result<(Vec<HermMat>, usize), MatError> {
    validate_povm_effects(povm, 1e-9)?;
    let d = povm[0].dim();
    let k = povm.len();
    let ext = d * k;

    // Isometry W: C^d -> C^d ⊗ C^k with W = Σ_b √B_b ⊗ |b>, i.e.
    // W[(i*k + b), j] = (√B_b)[i, j]. W†W = Σ_b B_b = I.
    let mut w = CplxMat::zeros(ext, d);
    for (b, eff) in povm.iter().enumerate() {
        let root = herm_sqrt(eff)?;
        for i in 0..d {
            for j in 0..d {
                w[(i * k + b, j)] = root.entry(i, j);
            }
        }
    }

    // Complete the d orthonormal columns of W to a basis of C^{d*k} by
    // modified Gram-Schmidt against the standard basis.
    let one = C64::new(1.0, 0.0);
    let mut basis: Vec<DVector<C64>> = (0..d).map(|j| w.column(j).into_owned()).collect();
    for j in 0..d {
        let mut v = basis[j].clone();
        for prev in basis[..j].iter() {
            let coeff = prev.dotc(&v);
            v.axpy(-coeff, prev, one);
        }
        let n = v.norm();
        if n < 1e-8 {
            return Err(MatError::InvalidPovm {
                reason: "dilation isometry columns are not independent".into(),
            });
        }
        basis[j] = v.unscale(n);
    }
    let mut completion: Vec<DVector<C64>> = Vec::with_capacity(ext - d);
    for e in 0..ext {
        if basis.len() + completion.len() == ext {
            break;
        }
        let mut v = DVector::<C64>::zeros(ext);
        v[e] = one;
        // two orthogonalization passes keep the completion orthonormal to
        // working precision
        for _ in 0..2 {
            for prev in basis.iter().chain(completion.iter()) {
                let coeff = prev.dotc(&v);
                v.axpy(-coeff, prev, one);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            completion.push(v.unscale(n));
        }
    }
    if basis.len() + completion.len() != ext {
        return Err(MatError::InvalidPovm {
            reason: "failed to complete dilation basis".into(),
        });
    }

    // Unitary U with U(e_j ⊗ |0>) = W e_j; remaining input basis vectors map
    // onto the completion in input order.
    let mut u = CplxMat::zeros(ext, ext);
    let mut next_completion = 0;
    for i in 0..d {
        for anc in 0..k {
            let col_idx = i * k + anc;
            if anc == 0 {
                u.set_column(col_idx, &basis[i]);
            } else {
                u.set_column(col_idx, &completion[next_completion]);
                next_completion += 1;
            }
        }
    }

    // P_b = U† (I_d ⊗ |b><b|) U
    let mut projectors = Vec::with_capacity(k);
    for b in 0..k {
        let mut marker = CplxMat::zeros(ext, ext);
        for i in 0..d {
            marker[(i * k + b, i * k + b)] = C64::new(1.0, 0.0);
        }
        let p = u.adjoint() * marker * &u;
        projectors.push(HermMat::new(p)?);
    }
    Ok((projectors, ext))
}

/// Embedding isometry `V = I_d ⊗ |0>` matching the [`naimark_dilate`]
/// convention: `V† P_b V = B_b`.
pub fn embedding_isometry(d: usize, k: usize) -> CplxMat {
    let mut v = CplxMat::zeros(d * k, d);
    for i in 0..d {
        v[(i * k, i)] = C64::new(1.0, 0.0);
    }
    v
}

/// Trine POVM `{(2/3)|ψ_i><ψ_i|}` with the three states at 120° in the x-z
/// plane. Handy as a genuinely non-projective qubit POVM.
pub fn trine_povm() -> Vec<HermMat> {
    use std::f64::consts::PI;
    (0..3)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / 3.0;
            bloch_projector(&BlochVec::xz_plane(angle), 1)
                .expect("unit direction")
                .scale(2.0 / 3.0)
        })
        .collect()
}

/// Symmetric planar k-outcome qubit POVM `{(2/k) P(u_j)}` with the `u_j`
/// forming a regular k-gon in the x-z plane, rotated by `phase`.
pub fn planar_symmetric_povm(k: usize, phase: f64) -> Vec<HermMat> {
    use std::f64::consts::PI;
    assert!(k >= 2, "planar POVM needs k >= 2");
    (0..k)
        .map(|j| {
            let angle = phase + 2.0 * PI * j as f64 / k as f64;
            bloch_projector(&BlochVec::xz_plane(angle), 1)
                .expect("unit direction")
                .scale(2.0 / k as f64)
        })
        .collect()
}

/// Random Hermitian matrix with i.i.d. Gaussian-ish entries in `[-1, 1]`.
pub fn random_hermitian(dim: usize, rng: &mut impl rand::Rng) -> HermMat {
    let mut m = CplxMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    HermMat::new(m).expect("square by construction")
}

/// Random PSD matrix `G G†` with optional rank restriction.
pub fn random_psd(dim: usize, rank: usize, rng: &mut impl rand::Rng) -> HermMat {
    let r = rank.clamp(1, dim);
    let mut g = CplxMat::zeros(dim, r);
    for i in 0..dim {
        for j in 0..r {
            g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    HermMat::new(&g * g.adjoint()).expect("G G† is Hermitian")
}

/// Random density matrix (unit trace, PSD).
pub fn random_density(dim: usize, rng: &mut impl rand::Rng) -> HermMat {
    let p = random_psd(dim, dim, rng);
    let t = p.trace();
    p.scale(1.0 / t)
}

/// Random unit Bloch vector, uniform on the sphere.
pub fn random_unit_bloch(rng: &mut impl rand::Rng) -> BlochVec {
    loop {
        let v = BlochVec::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}
