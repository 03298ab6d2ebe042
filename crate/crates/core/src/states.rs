//! Validated density matrices, pure states, spectral factors and purifications.

use crate::error::{Error, Result};
use crate::linalg::{
    c64, herm_eig, herm_eig_unchecked, hermitian_part, is_finite, max_abs, CMatrix, CVector,
    Subsystem,
};

/// Tolerance on `|tr A - 1|`.
pub const TRACE_TOL: f64 = 1e-9;
/// Tolerance on `| ||x|| - 1 |` for pure states.
pub const NORM_TOL: f64 = 1e-10;

/// Hermitian PSD trace-one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_density(&m)
    }

    pub fn pure(x: &PureState) -> Self {
        Self {
            matrix: x.projector(),
        }
    }

    /// Maximally mixed state `I / n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n).scale(1.0 / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Numerical rank with the default PSD tolerance.
    pub fn rank(&self) -> usize {
        let eig = herm_eig_unchecked(&self.matrix);
        eig.rank_above(eig.psd_tol())
    }

    /// The state vector when the matrix has rank one within `tol`
    /// (second eigenvalue at most `tol`).
    pub fn as_pure(&self, tol: f64) -> Option<PureState> {
        let eig = herm_eig_unchecked(&self.matrix);
        if eig.values.len() > 1 && eig.values[1] > tol {
            return None;
        }
        let v = eig.vectors.column(0).into_owned();
        Some(PureState::from_vector_unchecked(v))
    }
}

/// Checks Hermiticity, positivity and unit trace.
pub fn validate_density(m: &CMatrix) -> Result<DensityMatrix> {
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let eig = herm_eig(m)?;
    if eig.min() < -eig.psd_tol() {
        return Err(Error::NotPsd(eig.min()));
    }
    let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::TraceNotOne(tr));
    }
    Ok(DensityMatrix {
        matrix: hermitian_part(m),
    })
}

/// Unit vector with the global phase fixed so that its first nonzero
/// component is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vector: CVector,
}

impl PureState {
    pub fn new(v: CVector) -> Result<Self> {
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self::from_vector_unchecked(v))
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self::from_vector_unchecked(v.unscale(norm)))
    }

    fn from_vector_unchecked(mut v: CVector) -> Self {
        fix_phase(&mut v);
        Self { vector: v }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn projector(&self) -> CMatrix {
        &self.vector * self.vector.adjoint()
    }
}

/// Rotates the global phase so that the first component with modulus above
/// `1e-12` is real and positive.
pub fn fix_phase(v: &mut CVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = z.conj() / z.norm();
        for e in v.iter_mut() {
            *e *= phase;
        }
    }
}

/// `A = X D^2 X*` with `X` an isometry and `D` positive diagonal.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    /// `n x r`, orthonormal columns.
    pub isometry: CMatrix,
    /// Diagonal of `D`, positive and descending.
    pub diag: Vec<f64>,
}

impl SpectralFactor {
    pub fn rank(&self) -> usize {
        self.diag.len()
    }

    /// `D` as an `r x r` matrix.
    pub fn d_matrix(&self) -> CMatrix {
        crate::linalg::diag(&self.diag)
    }

    /// `X D`, the square-root factor with `(XD)(XD)* = A`.
    pub fn scaled(&self) -> CMatrix {
        &self.isometry * self.d_matrix()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let s = self.scaled();
        &s * s.adjoint()
    }
}

/// Spectral factorization of a PSD matrix with zero eigenvalues dropped.
pub fn spectral_factor(a: &CMatrix) -> Result<SpectralFactor> {
    let eig = herm_eig(a)?;
    let tol = eig.psd_tol();
    if eig.min() < -tol {
        return Err(Error::NotPsd(eig.min()));
    }
    let r = eig.rank_above(tol);
    let mut isometry = eig.vectors.columns(0, r).into_owned();
    for mut col in isometry.column_iter_mut() {
        let mut v = col.clone_owned();
        fix_phase(&mut v);
        col.copy_from(&v);
    }
    Ok(SpectralFactor {
        isometry,
        diag: eig.values[..r].iter().map(|v| v.sqrt()).collect(),
    })
}

/// Vector in `C^r (x) C^m` stored as `r` consecutive blocks of length `m`;
/// tracing out the first factor recovers the purified state.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    pub ancilla_dim: usize,
    pub vector: CVector,
}

impl Purification {
    pub fn new(ancilla_dim: usize, vector: CVector) -> Result<Self> {
        if ancilla_dim == 0 || !vector.len().is_multiple_of(ancilla_dim) {
            return Err(Error::InvalidProblem(format!(
                "purification length {} is not a multiple of ancilla dimension {}",
                vector.len(),
                ancilla_dim
            )));
        }
        Ok(Self {
            ancilla_dim,
            vector,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.vector.len() / self.ancilla_dim
    }

    pub fn block(&self, j: usize) -> CVector {
        let m = self.system_dim();
        self.vector.rows(j * m, m).into_owned()
    }

    /// `sum_j y_j y_j*` over the blocks.
    pub fn reduced(&self) -> CMatrix {
        let m = self.system_dim();
        let phi = &self.vector * self.vector.adjoint();
        crate::linalg::partial_trace(&phi, (self.ancilla_dim, m), Subsystem::First)
            .expect("dimensions are consistent by construction")
    }

    /// Same state with `ancilla_dim` raised to `r` by appending zero blocks.
    pub fn padded(&self, r: usize) -> Self {
        if r <= self.ancilla_dim {
            return self.clone();
        }
        let m = self.system_dim();
        let mut v = CVector::zeros(r * m);
        v.rows_mut(0, self.vector.len()).copy_from(&self.vector);
        Self {
            ancilla_dim: r,
            vector: v,
        }
    }
}

/// Purification `sum_k sqrt(lambda_k) (W v_k) (x) v_k` of a PSD matrix.
///
/// Without `w` the ancilla vectors are the standard basis vectors `e_k`
/// (Schmidt form). A given `w` is `r x m` and must map the eigenvectors with
/// positive eigenvalue to orthonormal vectors.
pub fn purify(a: &CMatrix, ancilla_dim: usize, w: Option<&CMatrix>) -> Result<Purification> {
    let f = spectral_factor(a)?;
    let m = a.nrows();
    let rank = f.rank();
    if ancilla_dim < rank {
        return Err(Error::AncillaTooSmall {
            ancilla: ancilla_dim,
            rank,
        });
    }
    let anc = match w {
        None => CMatrix::identity(ancilla_dim, rank),
        Some(w) => {
            if w.shape() != (ancilla_dim, m) {
                return Err(Error::ShapeMismatch {
                    expected: (ancilla_dim, m),
                    got: w.shape(),
                });
            }
            let images = w * &f.isometry;
            let defect = max_abs(&(images.adjoint() * &images - CMatrix::identity(rank, rank)));
            if defect > 1e-9 {
                return Err(Error::InvalidIsometry(format!(
                    "not isometric on the support (defect {defect:e})"
                )));
            }
            images
        }
    };
    let mut v = CVector::zeros(ancilla_dim * m);
    for k in 0..rank {
        let s = f.diag[k];
        for j in 0..ancilla_dim {
            let coeff = anc[(j, k)] * s;
            if coeff == c64(0.0, 0.0) {
                continue;
            }
            for a_idx in 0..m {
                v[j * m + a_idx] += coeff * f.isometry[(a_idx, k)];
            }
        }
    }
    Ok(Purification {
        ancilla_dim,
        vector: v,
    })
}

/// Result of rewriting two linearly independent qubit states as
/// combinations that are pure.
#[derive(Debug, Clone)]
pub struct QubitReduction {
    pub x1: PureState,
    pub x2: PureState,
    /// Smallest nonnegative `c` with `A1 - c A2` singular.
    pub c: f64,
    /// Smallest nonnegative `c~` with `A2 - c~ A1~` singular.
    pub c_tilde: f64,
    /// `x_i x_i* = sum_j mixing[i][j] A_j`.
    pub mixing: [[f64; 2]; 2],
}

impl QubitReduction {
    /// Applies the same linear combinations to another pair.
    pub fn apply(&self, b1: &CMatrix, b2: &CMatrix) -> (CMatrix, CMatrix) {
        let r = &self.mixing;
        (
            b1.scale(r[0][0]) + b2.scale(r[0][1]),
            b1.scale(r[1][0]) + b2.scale(r[1][1]),
        )
    }
}

/// Frobenius Gram determinant of two matrices, normalized to lie in `[0, 1]`.
pub fn gram_determinant(a: &CMatrix, b: &CMatrix) -> f64 {
    let aa = a.norm_squared();
    let bb = b.norm_squared();
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    let ab = a.dotc(b).norm_sqr();
    (aa * bb - ab) / (aa * bb)
}

/// Smallest nonnegative `c` with `det(P - c Q) = 0` for 2x2 PSD `P, Q`.
fn smallest_singular_shift(p: &CMatrix, q: &CMatrix) -> Result<f64> {
    let det = |m: &CMatrix| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let d = det(p);
    if d <= 1e-12 {
        return Ok(0.0);
    }
    let a = det(q);
    let b = (p[(0, 0)] * q[(1, 1)] + p[(1, 1)] * q[(0, 0)]
        - p[(0, 1)] * q[(1, 0)]
        - p[(1, 0)] * q[(0, 1)])
        .re;
    let disc = (b * b - 4.0 * a * d).max(0.0);
    let denom = b + disc.sqrt();
    if denom <= 0.0 {
        return Err(Error::DecompositionDegenerate(
            "determinant pencil has no nonnegative root".into(),
        ));
    }
    Ok(2.0 * d / denom)
}

/// Replaces two linearly independent qubit density matrices by pure states
/// spanning the same pair of lines through combinations with recorded
/// coefficients.
pub fn reduce_qubit_pair(a1: &DensityMatrix, a2: &DensityMatrix) -> Result<QubitReduction> {
    if a1.dim() != 2 || a2.dim() != 2 {
        return Err(Error::ShapeMismatch {
            expected: (2, 2),
            got: if a1.dim() != 2 {
                a1.matrix.shape()
            } else {
                a2.matrix.shape()
            },
        });
    }
    let g = gram_determinant(&a1.matrix, &a2.matrix);
    if g < 1e-10 {
        return Err(Error::LinearlyDependent(g));
    }
    let c = smallest_singular_shift(&a1.matrix, &a2.matrix)?;
    if c >= 1.0 - 1e-12 {
        return Err(Error::DecompositionDegenerate(format!(
            "shift {c} leaves no trace"
        )));
    }
    let r1 = [1.0 / (1.0 - c), -c / (1.0 - c)];
    let at1 = (&a1.matrix - a2.matrix.scale(c)).scale(1.0 / (1.0 - c));
    let c_tilde = smallest_singular_shift(&a2.matrix, &at1)?;
    if c_tilde >= 1.0 - 1e-12 {
        return Err(Error::DecompositionDegenerate(format!(
            "second shift {c_tilde} leaves no trace"
        )));
    }
    let r2 = [
        -c_tilde * r1[0] / (1.0 - c_tilde),
        (1.0 - c_tilde * r1[1]) / (1.0 - c_tilde),
    ];
    let at2 = (&a2.matrix - at1.scale(c_tilde)).scale(1.0 / (1.0 - c_tilde));
    let top = |m: &CMatrix| {
        let eig = herm_eig_unchecked(m);
        PureState::from_vector_unchecked(eig.vectors.column(0).into_owned())
    };
    Ok(QubitReduction {
        x1: top(&at1),
        x2: top(&at2),
        c,
        c_tilde,
        mixing: [r1, r2],
    })
}
