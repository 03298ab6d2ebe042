//! Dense complex matrix kernel.
//!
//! Thin layer over `nalgebra` that fixes the conventions the rest of the crate
//! relies on: eigenvalues sorted in descending order, a relative tolerance for
//! positive semidefiniteness, and the Kronecker index layout `(a, b) -> a * q + b`
//! for a `p x q` bipartition.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default tolerance for `||H - H*||_max`, relative to `max(1, ||H||_max)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative factor for the PSD tolerance `psd_tol = 1e-9 * max(1, max |lambda|)`.
pub const PSD_RTOL: f64 = 1e-9;

/// Relative cutoff on singular values used by [`pinv`].
pub const PINV_RTOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a complex matrix from real row-major entries.
pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn diag(values: &[f64]) -> CMatrix {
    let mut m = zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c64(v, 0.0);
    }
    m
}

/// `e_i` in `C^n`.
pub fn basis_vector(n: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[i] = c64(1.0, 0.0);
    v
}

/// Matrix unit `E_ij` in `M_n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(n, n);
    m[(i, j)] = c64(1.0, 0.0);
    m
}

/// `v v*` as a matrix.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

/// `||H - H*||_max`.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let n = h.nrows().min(h.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn ensure_hermitian(h: &CMatrix) -> Result<usize> {
    let n = ensure_square(h)?;
    if !is_finite(h) {
        return Err(Error::NonFinite);
    }
    let defect = hermitian_defect(h);
    if defect > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(n)
}

/// `(H + H*) / 2`.
pub fn hermitian_part(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Unitary whose columns are the eigenvectors matching `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn psd_tol(&self) -> f64 {
        psd_tol(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues strictly above `tol`.
    pub fn rank_above(&self, tol: f64) -> usize {
        self.values.iter().filter(|&&v| v > tol).count()
    }

    /// `V f(diag(lambda)) V*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// `1e-9 * max(1, max |lambda|)`.
pub fn psd_tol(values: &[f64]) -> f64 {
    PSD_RTOL * values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn herm_eig(h: &CMatrix) -> Result<Eigh> {
    ensure_hermitian(h)?;
    Ok(herm_eig_unchecked(&hermitian_part(h)))
}

/// Eigendecomposition without the Hermiticity check; the input is symmetrized.
pub(crate) fn herm_eig_unchecked(h: &CMatrix) -> Eigh {
    let n = h.nrows();
    if n == 0 {
        return Eigh {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let (values, vectors) = dense::herm_eig(&hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    Eigh {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]),
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(herm_eig(h)?.min())
}

/// Singular value decomposition with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x p`, `p = min(rows, cols)`.
    pub u: CMatrix,
    pub values: Vec<f64>,
    /// `cols x p`; `A = U diag(s) V*`.
    pub v: CMatrix,
}

impl Svd {
    pub fn rank(&self, rtol: f64) -> usize {
        let cutoff = rtol * self.values.first().copied().unwrap_or(0.0);
        self.values
            .iter()
            .filter(|&&s| s > cutoff && s > 0.0)
            .count()
    }
}

pub fn svd(a: &CMatrix) -> Svd {
    let (rows, cols) = a.shape();
    let p = rows.min(cols);
    if p == 0 {
        return Svd {
            u: zeros(rows, 0),
            values: Vec::new(),
            v: zeros(cols, 0),
        };
    }
    let (u, s, v) = dense::svd(a);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    Svd {
        u: CMatrix::from_fn(rows, p, |r, c| u[(r, order[c])]),
        values: order.iter().map(|&i| s[i]).collect(),
        v: CMatrix::from_fn(cols, p, |r, c| v[(r, order[c])]),
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).values
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    singular_values(a).iter().sum()
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Principal square root of a PSD matrix; eigenvalues in `[-psd_tol, 0)` are clipped.
pub fn sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    if eig.min() < -eig.psd_tol() {
        return Err(Error::NotPsd(eig.min()));
    }
    Ok(eig.map(|v| v.max(0.0).sqrt()))
}

/// Projection onto the PSD cone in Frobenius norm.
pub fn clip_psd(h: &CMatrix) -> CMatrix {
    herm_eig_unchecked(h).map(|v| v.max(0.0))
}

/// `F(A, B) = || sqrt(A) sqrt(B) ||_1`.
pub fn fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let sa = sqrt_psd(a)?;
    let sb = sqrt_psd(b)?;
    if sa.nrows() != sb.nrows() {
        return Err(Error::ShapeMismatch {
            expected: sa.shape(),
            got: sb.shape(),
        });
    }
    Ok(trace_norm(&(sa * sb)))
}

/// Moore-Penrose pseudoinverse with singular values below `rtol * s_max` treated as zero.
pub fn pinv_with_rtol(a: &CMatrix, rtol: f64) -> CMatrix {
    let dec = svd(a);
    let r = dec.rank(rtol);
    let mut out = zeros(a.ncols(), a.nrows());
    for k in 0..r {
        let vk = dec.v.column(k);
        let uk = dec.u.column(k);
        out += (vk * uk.adjoint()).scale(1.0 / dec.values[k]);
    }
    out
}

pub fn pinv(a: &CMatrix) -> CMatrix {
    pinv_with_rtol(a, PINV_RTOL)
}

/// Entrywise product.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    Ok(a.component_mul(b))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

/// Which tensor factor to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of a `(pq) x (pq)` matrix over one factor of `C^p (x) C^q`.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), which: Subsystem) -> Result<CMatrix> {
    let (p, q) = dims;
    if m.shape() != (p * q, p * q) {
        return Err(Error::ShapeMismatch {
            expected: (p * q, p * q),
            got: m.shape(),
        });
    }
    Ok(match which {
        Subsystem::Second => CMatrix::from_fn(p, p, |a, a2| {
            (0..q).map(|b| m[(a * q + b, a2 * q + b)]).sum()
        }),
        Subsystem::First => CMatrix::from_fn(q, q, |b, b2| {
            (0..p).map(|a| m[(a * q + b, a * q + b2)]).sum()
        }),
    })
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn range_basis(a: &CMatrix, rtol: f64) -> CMatrix {
    let dec = svd(a);
    let r = dec.rank(rtol);
    dec.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `q` inside `C^n`.
pub fn orthogonal_complement(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let r = q.ncols();
    if r >= n {
        return zeros(n, 0);
    }
    let proj = identity(n) - q * q.adjoint();
    let eig = herm_eig_unchecked(&proj);
    eig.vectors.columns(0, n - r).into_owned()
}

/// Square unitary whose leading columns are the given orthonormal columns.
pub fn complete_to_unitary(q: &CMatrix) -> CMatrix {
    let comp = orthogonal_complement(q);
    let mut u = zeros(q.nrows(), q.nrows());
    u.columns_mut(0, q.ncols()).copy_from(q);
    u.columns_mut(q.ncols(), comp.ncols()).copy_from(&comp);
    u
}

/// Nearest isometry (polar factor) of a full-column-rank matrix.
pub fn polar_isometry(a: &CMatrix) -> CMatrix {
    let dec = svd(a);
    &dec.u * dec.v.adjoint()
}

/// Unitary `U` with `U from = to`, which exists iff `from* from = to* to`.
///
/// Both inputs must have the same shape. The Gram matrices must agree within
/// `tol` (max-entry), otherwise [`Error::GramMismatch`] is returned.
pub fn unitary_mapping(from: &CMatrix, to: &CMatrix, tol: f64) -> Result<CMatrix> {
    if from.shape() != to.shape() {
        return Err(Error::ShapeMismatch {
            expected: from.shape(),
            got: to.shape(),
        });
    }
    let gram_gap = max_abs(&(from.adjoint() * from - to.adjoint() * to));
    if gram_gap > tol {
        return Err(Error::GramMismatch(gram_gap));
    }
    let n = from.nrows();
    let dec = svd(from);
    let r = dec.rank(1e-10);
    if r == 0 {
        return Ok(identity(n));
    }
    let qx = dec.u.columns(0, r).into_owned();
    let w = dec.v.columns(0, r).into_owned();
    let mut qy = to * &w;
    for k in 0..r {
        let s = dec.values[k];
        qy.column_mut(k).scale_mut(1.0 / s);
    }
    let qy = polar_isometry(&qy);
    let cx = orthogonal_complement(&qx);
    let cy = orthogonal_complement(&qy);
    Ok(&qy * qx.adjoint() + cy * cx.adjoint())
}

/// Solves the square system `a x = b` via LU; `None` when singular.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}

/// Column-stacks a matrix (`vec(A)[j * rows + i] = A[i, j]`).
pub fn vectorize(a: &CMatrix) -> CVector {
    CVector::from_iterator(a.nrows() * a.ncols(), a.iter().copied())
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

/// Dense decompositions delegated to faer; nalgebra's SVD loses accuracy
/// on rank-deficient matrices.
pub(crate) mod dense {
    use super::{Mat, Side};
    use nalgebra::{DMatrix, DVector, Scalar};

    fn to_faer<T: Scalar + Copy>(a: &DMatrix<T>) -> Mat<T> {
        Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
    }

    fn from_faer<T: Scalar + Copy>(a: faer::MatRef<'_, T>) -> DMatrix<T> {
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
    }

    macro_rules! impl_dense {
        ($t:ty, $svd:ident, $eig:ident, $re:expr) => {
            /// Thin SVD `a = u diag(s) v*`.
            pub fn $svd(a: &DMatrix<$t>) -> (DMatrix<$t>, Vec<f64>, DMatrix<$t>) {
                let dec = to_faer(a)
                    .thin_svd()
                    .expect("SVD of a finite matrix converges");
                let s = dec.S().column_vector();
                (
                    from_faer(dec.U()),
                    (0..s.nrows()).map(|i| $re(s[i])).collect(),
                    from_faer(dec.V()),
                )
            }

            /// Eigenvalues (unordered) and eigenvectors of a self-adjoint matrix.
            pub fn $eig(h: &DMatrix<$t>) -> (DVector<f64>, DMatrix<$t>) {
                let dec = to_faer(h)
                    .self_adjoint_eigen(Side::Lower)
                    .expect("eigendecomposition of a finite matrix converges");
                let s = dec.S().column_vector();
                (
                    DVector::from_fn(s.nrows(), |i, _| $re(s[i])),
                    from_faer(dec.U()),
                )
            }
        };
    }

    impl_dense!(super::C64, svd, herm_eig, |z: super::C64| z.re);
    impl_dense!(f64, real_svd, real_sym_eig, |x: f64| x);
}
