//! Kraus and Choi representations of CP maps and the problem type shared by
//! every decision procedure.
//!
//! The Choi matrix lives on input (x) output:
//! `J = sum_ij E_ij (x) T(E_ij)`, so `J[(i m + a), (j m + b)] = T(E_ij)[a, b]`.
//! A Kraus operator `F` (m x n) corresponds to the vector `w` with
//! `F[a, b] = w[b m + a]`, i.e. its column-major vectorization.

pub mod oracle;
pub mod screen;

use std::fmt;
use std::str::FromStr;

use crate::certificate::Residuals;
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_hermitian, herm_eig, identity, is_finite, partial_trace, vectorize, CMatrix, CVector,
    Subsystem,
};

/// Tolerance for the TP and unital flags of a Kraus channel.
pub const CLASS_FLAG_TOL: f64 = 1e-8;

/// `X -> sum_j F_j X F_j*` with `F_j` of size `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    operators: Vec<CMatrix>,
    tp: bool,
    unital: bool,
}

impl KrausChannel {
    pub fn new(in_dim: usize, out_dim: usize, operators: Vec<CMatrix>) -> Result<Self> {
        for f in &operators {
            if f.shape() != (out_dim, in_dim) {
                return Err(Error::ShapeMismatch {
                    expected: (out_dim, in_dim),
                    got: f.shape(),
                });
            }
            if !is_finite(f) {
                return Err(Error::NonFinite);
            }
        }
        let mut ch = Self {
            in_dim,
            out_dim,
            operators,
            tp: false,
            unital: false,
        };
        ch.tp = ch.tp_defect() <= CLASS_FLAG_TOL;
        ch.unital = ch.unital_defect() <= CLASS_FLAG_TOL;
        Ok(ch)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, vec![identity(n)]).expect("identity operator has matching shape")
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn is_tp(&self) -> bool {
        self.tp
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    /// `sum F_j* F_j`.
    pub fn dual_identity_image(&self) -> CMatrix {
        self.operators
            .iter()
            .fold(CMatrix::zeros(self.in_dim, self.in_dim), |acc, f| {
                acc + f.adjoint() * f
            })
    }

    /// `T(I) = sum F_j F_j*`.
    pub fn identity_image(&self) -> CMatrix {
        self.operators
            .iter()
            .fold(CMatrix::zeros(self.out_dim, self.out_dim), |acc, f| {
                acc + f * f.adjoint()
            })
    }

    /// `||sum F_j* F_j - I_n||_F`.
    pub fn tp_defect(&self) -> f64 {
        (self.dual_identity_image() - identity(self.in_dim)).norm()
    }

    /// `||sum F_j F_j* - I_m||_F`.
    pub fn unital_defect(&self) -> f64 {
        (self.identity_image() - identity(self.out_dim)).norm()
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.in_dim, self.in_dim) {
            return Err(Error::ShapeMismatch {
                expected: (self.in_dim, self.in_dim),
                got: x.shape(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &CMatrix) -> CMatrix {
        self.operators
            .iter()
            .fold(CMatrix::zeros(self.out_dim, self.out_dim), |acc, f| {
                acc + f * x * f.adjoint()
            })
    }

    /// Kraus operators stacked vertically into an `(r m) x n` matrix.
    pub fn stacked(&self) -> CMatrix {
        let m = self.out_dim;
        let mut s = CMatrix::zeros(m * self.operators.len(), self.in_dim);
        for (j, f) in self.operators.iter().enumerate() {
            s.rows_mut(j * m, m).copy_from(f);
        }
        s
    }
}

/// Choi matrix of a linear map `M_n -> M_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    in_dim: usize,
    out_dim: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn new(in_dim: usize, out_dim: usize, matrix: CMatrix) -> Result<Self> {
        let size = in_dim * out_dim;
        if matrix.shape() != (size, size) {
            return Err(Error::ShapeMismatch {
                expected: (size, size),
                got: matrix.shape(),
            });
        }
        ensure_hermitian(&matrix)?;
        Ok(Self {
            in_dim,
            out_dim,
            matrix,
        })
    }

    /// Builds `sum_ij E_ij (x) T(E_ij)` from the images of the matrix units.
    pub fn from_images(
        in_dim: usize,
        out_dim: usize,
        images: impl Fn(usize, usize) -> CMatrix,
    ) -> Self {
        let (n, m) = (in_dim, out_dim);
        let mut j = CMatrix::zeros(n * m, n * m);
        for r in 0..n {
            for c in 0..n {
                j.view_mut((r * m, c * m), (m, m)).copy_from(&images(r, c));
            }
        }
        Self {
            in_dim,
            out_dim,
            matrix: j,
        }
    }

    pub fn from_kraus(ch: &KrausChannel) -> Self {
        let size = ch.in_dim * ch.out_dim;
        let mut j = CMatrix::zeros(size, size);
        for f in &ch.operators {
            let w = vectorize(f);
            j += &w * w.adjoint();
        }
        Self {
            in_dim: ch.in_dim,
            out_dim: ch.out_dim,
            matrix: j,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `T(X)[a, b] = sum_ij X_ij J[(i m + a), (j m + b)]`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let (n, m) = (self.in_dim, self.out_dim);
        if x.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: x.shape(),
            });
        }
        Ok(choi_apply(&self.matrix, n, m, x))
    }

    /// `Tr_out J`, equal to `I_n` exactly for trace-preserving maps.
    pub fn trace_out_output(&self) -> CMatrix {
        partial_trace(&self.matrix, (self.in_dim, self.out_dim), Subsystem::Second)
            .expect("Choi dimensions are consistent")
    }

    /// `Tr_in J = T(I)`.
    pub fn trace_out_input(&self) -> CMatrix {
        partial_trace(&self.matrix, (self.in_dim, self.out_dim), Subsystem::First)
            .expect("Choi dimensions are consistent")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::herm_eig_unchecked(&self.matrix).min()
    }

    pub fn to_kraus(&self) -> Result<KrausChannel> {
        kraus_from_choi(self)
    }
}

pub(crate) fn choi_apply(j: &CMatrix, n: usize, m: usize, x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m, m);
    for r in 0..n {
        for c in 0..n {
            let xv = x[(r, c)];
            if xv.re == 0.0 && xv.im == 0.0 {
                continue;
            }
            out += j.view((r * m, c * m), (m, m)) * xv;
        }
    }
    out
}

pub fn choi_from_kraus(ch: &KrausChannel) -> ChoiMatrix {
    ChoiMatrix::from_kraus(ch)
}

/// Kraus operators `sqrt(lambda_l) w_l` reshaped from the eigenvectors of a
/// PSD Choi matrix; eigenvalues below the PSD tolerance are dropped.
pub fn kraus_from_choi(j: &ChoiMatrix) -> Result<KrausChannel> {
    let eig = herm_eig(&j.matrix)?;
    let tol = eig.psd_tol();
    if eig.min() < -tol {
        return Err(Error::NotPsd(eig.min()));
    }
    let (n, m) = (j.in_dim, j.out_dim);
    let cutoff = 1e-14 * eig.max().max(1.0);
    let ops = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > cutoff)
        .map(|(l, &v)| {
            let w: CVector = eig.vectors.column(l) * crate::linalg::c64(v.sqrt(), 0.0);
            CMatrix::from_fn(m, n, |a, b| w[b * m + a])
        })
        .collect();
    KrausChannel::new(n, m, ops)
}

pub fn apply_channel(ch: &KrausChannel, x: &CMatrix) -> Result<CMatrix> {
    ch.apply(x)
}

/// `X -> tr(X) B` for PSD `B`, with Kraus operators `sqrt(mu_l) w_l e_j*`.
pub fn replacement_channel(in_dim: usize, b: &CMatrix) -> Result<KrausChannel> {
    let eig = herm_eig(b)?;
    if eig.min() < -eig.psd_tol() {
        return Err(Error::NotPsd(eig.min()));
    }
    let m = b.nrows();
    let mut ops = Vec::new();
    for (l, &mu) in eig.values.iter().enumerate() {
        if mu <= eig.psd_tol() {
            continue;
        }
        let w = eig.vectors.column(l) * crate::linalg::c64(mu.sqrt(), 0.0);
        for j in 0..in_dim {
            let mut f = CMatrix::zeros(m, in_dim);
            f.column_mut(j).copy_from(&w);
            ops.push(f);
        }
    }
    KrausChannel::new(in_dim, m, ops)
}

/// Trace-preserving channel whose Stinespring isometry sends each column
/// `x_i` (length n) to the column `y_i` of `y` (length `r m`, r blocks of
/// length m): the Kraus operators are the `m x n` row blocks of a unitary
/// `U` with `U (x_i (+) 0) = y_i`, so `T(x_i x_j*) = sum_l y_il y_jl*`.
///
/// Requires `X* X = Y* Y` within `gram_tol`. `y` is padded with zero blocks
/// when `r m < n`.
pub fn channel_from_frames(
    x: &CMatrix,
    y: &CMatrix,
    m: usize,
    gram_tol: f64,
) -> Result<KrausChannel> {
    let n = x.nrows();
    let k = x.ncols();
    if y.ncols() != k || m == 0 || !y.nrows().is_multiple_of(m) {
        return Err(Error::ShapeMismatch {
            expected: (y.nrows().div_ceil(m.max(1)) * m.max(1), k),
            got: y.shape(),
        });
    }
    let mut blocks = y.nrows() / m;
    while blocks * m < n {
        blocks += 1;
    }
    let len = blocks * m;
    let mut yy = CMatrix::zeros(len, k);
    yy.rows_mut(0, y.nrows()).copy_from(y);
    let mut xx = CMatrix::zeros(len, k);
    xx.rows_mut(0, n).copy_from(x);
    let u = crate::linalg::unitary_mapping(&xx, &yy, gram_tol)?;
    let ops = (0..blocks)
        .map(|j| u.view((j * m, 0), (m, n)).into_owned())
        .filter(|f| f.norm() > 1e-14)
        .collect();
    KrausChannel::new(n, m, ops)
}

/// Which constraints beyond complete positivity the map must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapClass {
    /// Completely positive.
    Cp,
    /// Completely positive and trace preserving.
    Tpcp,
    /// Completely positive and unital.
    Ucp,
    /// Completely positive, trace preserving and unital.
    Utpcp,
}

impl MapClass {
    pub const ALL: [MapClass; 4] = [MapClass::Cp, MapClass::Tpcp, MapClass::Ucp, MapClass::Utpcp];

    pub fn requires_tp(self) -> bool {
        matches!(self, MapClass::Tpcp | MapClass::Utpcp)
    }

    pub fn requires_unital(self) -> bool {
        matches!(self, MapClass::Ucp | MapClass::Utpcp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MapClass::Cp => "CP",
            MapClass::Tpcp => "TPCP",
            MapClass::Ucp => "UCP",
            MapClass::Utpcp => "UTPCP",
        }
    }
}

impl fmt::Display for MapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CP" => Ok(MapClass::Cp),
            "TPCP" | "CPTP" => Ok(MapClass::Tpcp),
            "UCP" => Ok(MapClass::Ucp),
            "UTPCP" | "UCPTP" => Ok(MapClass::Utpcp),
            other => Err(Error::InvalidProblem(format!(
                "unknown map class {other:?}"
            ))),
        }
    }
}

/// Find a map of the given class with `T(A_i) = B_i` (and `T(I) = B` when prescribed).
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    inputs: Vec<CMatrix>,
    targets: Vec<CMatrix>,
    class: MapClass,
    identity_image: Option<CMatrix>,
}

impl FeasibilityProblem {
    /// Checks shapes, finiteness and Hermiticity. Inputs need not be
    /// trace-one.
    pub fn new(inputs: Vec<CMatrix>, targets: Vec<CMatrix>, class: MapClass) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidProblem("no input states".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::InvalidProblem(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let n = inputs[0].nrows();
        let m = targets[0].nrows();
        if n == 0 || m == 0 {
            return Err(Error::InvalidProblem("empty matrix".into()));
        }
        for (list, d) in [(&inputs, n), (&targets, m)] {
            for a in list.iter() {
                if a.shape() != (d, d) {
                    return Err(Error::ShapeMismatch {
                        expected: (d, d),
                        got: a.shape(),
                    });
                }
                if !is_finite(a) {
                    return Err(Error::NonFinite);
                }
                ensure_hermitian(a)?;
            }
        }
        Ok(Self {
            inputs,
            targets,
            class,
            identity_image: None,
        })
    }

    /// Adds the constraint `T(I) = b`.
    pub fn with_identity_image(mut self, b: CMatrix) -> Result<Self> {
        let m = self.out_dim();
        if b.shape() != (m, m) {
            return Err(Error::ShapeMismatch {
                expected: (m, m),
                got: b.shape(),
            });
        }
        if !is_finite(&b) {
            return Err(Error::NonFinite);
        }
        ensure_hermitian(&b)?;
        self.identity_image = Some(b);
        Ok(self)
    }

    pub fn inputs(&self) -> &[CMatrix] {
        &self.inputs
    }

    pub fn targets(&self) -> &[CMatrix] {
        &self.targets
    }

    pub fn class(&self) -> MapClass {
        self.class
    }

    pub fn identity_image(&self) -> Option<&CMatrix> {
        self.identity_image.as_ref()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.inputs[0].nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.targets[0].nrows()
    }

    /// Same data with a different class.
    pub fn with_class(&self, class: MapClass) -> Self {
        Self {
            class,
            ..self.clone()
        }
    }

    /// Effective `T(I)` constraint: the prescribed image, or `I_m` for unital classes.
    pub fn required_identity_image(&self) -> Option<CMatrix> {
        match (&self.identity_image, self.class.requires_unital()) {
            (Some(b), _) => Some(b.clone()),
            (None, true) => Some(identity(self.out_dim())),
            (None, false) => None,
        }
    }
}

/// Residuals of `ch` against every constraint of `p`.
pub fn verify_channel(p: &FeasibilityProblem, ch: &KrausChannel) -> Result<Residuals> {
    if ch.in_dim() != p.in_dim() || ch.out_dim() != p.out_dim() {
        return Err(Error::ShapeMismatch {
            expected: (p.out_dim(), p.in_dim()),
            got: (ch.out_dim(), ch.in_dim()),
        });
    }
    let interpolation = p
        .inputs()
        .iter()
        .zip(p.targets())
        .map(|(a, b)| (ch.apply_unchecked(a) - b).norm())
        .fold(0.0, f64::max);
    Ok(Residuals {
        interpolation,
        trace_preserving: p.class().requires_tp().then(|| ch.tp_defect()),
        unital: p.class().requires_unital().then(|| ch.unital_defect()),
        identity_image: p.identity_image().map(|b| (ch.identity_image() - b).norm()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, diag, from_real, matrix_unit};

    #[test]
    fn identity_channel_choi_is_unnormalized_bell_projector() {
        let j = choi_from_kraus(&KrausChannel::identity(2));
        let mut expected = CMatrix::zeros(4, 4);
        for &(r, c) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            expected[(r, c)] = c64(1.0, 0.0);
        }
        assert!((j.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn completely_depolarizing_choi_is_scaled_identity() {
        // T(X) = tr(X) I_3 / 3 via Kraus E_ab / sqrt(3).
        let (n, m) = (2, 3);
        let mut ops = Vec::new();
        for a in 0..m {
            for b in 0..n {
                let mut f = CMatrix::zeros(m, n);
                f[(a, b)] = c64(1.0 / 3f64.sqrt(), 0.0);
                ops.push(f);
            }
        }
        let ch = KrausChannel::new(n, m, ops).unwrap();
        assert!(ch.is_tp());
        let j = choi_from_kraus(&ch);
        assert!((j.matrix() - identity(6).scale(1.0 / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn identity_choi_gives_single_identity_operator() {
        let j = choi_from_kraus(&KrausChannel::identity(3));
        let k = kraus_from_choi(&j).unwrap();
        assert_eq!(k.len(), 1);
        let f = &k.operators()[0];
        let phase = f[(0, 0)];
        assert!(
            (f.unscale(phase.norm()) * phase.conj().unscale(phase.norm()) - identity(3)).norm()
                < 1e-12
        );
    }

    #[test]
    fn rank_one_choi_gives_one_operator() {
        let f = from_real(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let ch = KrausChannel::new(2, 2, vec![f]).unwrap();
        let back = kraus_from_choi(&choi_from_kraus(&ch)).unwrap();
        assert_eq!(back.len(), 1);
        let x = from_real(2, 2, &[0.3, 0.1, 0.1, 0.7]);
        assert!((back.apply(&x).unwrap() - ch.apply(&x).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn replacement_map_kills_off_diagonal_units() {
        let b = from_real(2, 2, &[0.25, 0.1, 0.1, 0.75]);
        let j = ChoiMatrix::from_images(2, 2, |r, c| {
            if r == c {
                b.clone()
            } else {
                CMatrix::zeros(2, 2)
            }
        });
        let ch = kraus_from_choi(&j).unwrap();
        assert!(ch.is_tp());
        assert!(ch.apply(&matrix_unit(2, 0, 1)).unwrap().norm() < 1e-12);
        assert!((ch.apply(&matrix_unit(2, 1, 1)).unwrap() - &b).norm() < 1e-12);
    }

    #[test]
    fn non_psd_choi_is_rejected() {
        let j = ChoiMatrix::new(1, 2, diag(&[1.0, -1.0])).unwrap();
        assert!(matches!(kraus_from_choi(&j), Err(Error::NotPsd(_))));
    }

    #[test]
    fn problem_validation() {
        let a = vec![identity(2)];
        assert!(FeasibilityProblem::new(a.clone(), vec![], MapClass::Cp).is_err());
        assert!(matches!(
            FeasibilityProblem::new(a.clone(), vec![identity(3), identity(2)], MapClass::Cp),
            Err(Error::InvalidProblem(_))
        ));
        let bad = from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            FeasibilityProblem::new(a, vec![bad], MapClass::Cp),
            Err(Error::NotHermitian(_))
        ));
        assert_eq!("tpcp".parse::<MapClass>().unwrap(), MapClass::Tpcp);
    }
}
