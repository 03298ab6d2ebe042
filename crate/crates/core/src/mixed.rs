//! Certificates for interpolation with mixed targets.
//!
//! A TPCP map sends `x_i x_i*` to `B_i` exactly when some purifications
//! `y_i` of the `B_i` have the same Gram matrix as the `x_i`. This module
//! verifies and extracts such purification certificates, the equivalent
//! partial-isometry form `x_i* x_j = tr sqrt(B_i) sqrt(B_j) V_j V_i*`, and the
//! general mixed-input certificate built from spectral factors. Deciding
//! feasibility is left to the Choi oracle; the correlation-form check here
//! is only a sufficient condition.

use crate::certificate::{Certificate, ScreenResult, VERIFY_TOL};
use crate::choi::screen::{fidelity_screen as screen_pairs, BOUNDARY_TOL};
use crate::choi::{
    channel_from_frames, choi_from_kraus, kraus_from_choi, verify_channel, FeasibilityProblem,
    KrausChannel, MapClass, CLASS_FLAG_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{identity, kron, max_abs, outer, pinv, sqrt_psd, CMatrix, CVector};
use crate::pure::{decide_pure_tpcp, CorrelationMatrix, GramPair, PureOptions};
use crate::states::{purify, DensityMatrix, Purification, SpectralFactor};

/// Reductions of purifications must match their targets this closely.
pub const REDUCTION_TOL: f64 = 1e-8;

/// Necessary condition `F(B_i, B_j) >= F(A_i, A_j)` for every pair.
pub fn fidelity_screen(inputs: &[DensityMatrix], targets: &[DensityMatrix]) -> ScreenResult {
    let a: Vec<CMatrix> = inputs.iter().map(|d| d.matrix().clone()).collect();
    let b: Vec<CMatrix> = targets.iter().map(|d| d.matrix().clone()).collect();
    screen_pairs(&a, &b, BOUNDARY_TOL)
}

fn columns(xs: &CMatrix) -> Vec<CVector> {
    (0..xs.ncols()).map(|i| xs.column(i).into_owned()).collect()
}

fn tpcp_problem(x: &CMatrix, targets: &[CMatrix]) -> Result<FeasibilityProblem> {
    FeasibilityProblem::new(
        columns(x).iter().map(outer).collect(),
        targets.to_vec(),
        MapClass::Tpcp,
    )
}

/// Purifications `y_i` of the targets sharing one ancilla dimension.
#[derive(Debug, Clone)]
pub struct PurificationCertificate {
    pub purifications: Vec<Purification>,
    /// `X* X - Y* Y`.
    pub gram_check: CMatrix,
}

impl PurificationCertificate {
    pub fn new(x: &CMatrix, purifications: Vec<Purification>) -> Result<Self> {
        let y = purification_frame(&purifications)?;
        if y.ncols() != x.ncols() {
            return Err(Error::ShapeMismatch {
                expected: (y.nrows(), x.ncols()),
                got: y.shape(),
            });
        }
        let gram_check = x.adjoint() * x - y.adjoint() * &y;
        Ok(Self {
            purifications,
            gram_check,
        })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.purifications.first().map_or(0, |p| p.ancilla_dim)
    }

    /// The same certificate with every `y_i` replaced by `(Q ⊗ I) y_i`.
    pub fn rotate_ancilla(&self, q: &CMatrix) -> Result<Self> {
        let r = self.ancilla_dim();
        if q.shape() != (r, r) {
            return Err(Error::ShapeMismatch {
                expected: (r, r),
                got: q.shape(),
            });
        }
        let purifications = self
            .purifications
            .iter()
            .map(|p| {
                let u = kron(q, &identity(p.system_dim()));
                Purification::new(r, &u * &p.vector)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            purifications,
            gram_check: self.gram_check.clone(),
        })
    }
}

fn purification_frame(purifications: &[Purification]) -> Result<CMatrix> {
    let Some(first) = purifications.first() else {
        return Err(Error::InvalidProblem("no purifications".into()));
    };
    let len = first.vector.len();
    for p in purifications {
        if p.ancilla_dim != first.ancilla_dim || p.vector.len() != len {
            return Err(Error::ShapeMismatch {
                expected: (first.ancilla_dim, len),
                got: (p.ancilla_dim, p.vector.len()),
            });
        }
    }
    let cols: Vec<CVector> = purifications.iter().map(|p| p.vector.clone()).collect();
    Ok(CMatrix::from_columns(&cols))
}

/// Outcome of checking a certificate.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub valid: bool,
    /// Largest mismatch of the per-state conditions (reductions, partitions of identity).
    pub reduction_residual: f64,
    /// Largest mismatch of the pairwise overlap conditions.
    pub gram_residual: f64,
    /// Channel built from a valid purification certificate.
    pub channel: Option<KrausChannel>,
}

/// Checks `Σ_j y_ji y_ji* = B_i` and `X* X = Y* Y`; a valid certificate
/// yields a TPCP map, which is constructed and returned.
pub fn verify_purification_certificate(
    x: &CMatrix,
    targets: &[CMatrix],
    cert: &PurificationCertificate,
) -> Result<CertificateReport> {
    let k = x.ncols();
    if targets.len() != k || cert.purifications.len() != k {
        return Err(Error::InvalidProblem(format!(
            "{k} inputs, {} targets, {} purifications",
            targets.len(),
            cert.purifications.len()
        )));
    }
    let y = purification_frame(&cert.purifications)?;
    let m = cert.purifications[0].system_dim();
    let mut reduction_residual: f64 = 0.0;
    for (p, b) in cert.purifications.iter().zip(targets) {
        if b.shape() != (m, m) {
            return Err(Error::ShapeMismatch {
                expected: (m, m),
                got: b.shape(),
            });
        }
        reduction_residual = reduction_residual.max(max_abs(&(p.reduced() - b)));
    }
    let gram_residual = max_abs(&(x.adjoint() * x - y.adjoint() * &y));
    let valid = reduction_residual <= REDUCTION_TOL && gram_residual <= VERIFY_TOL;
    let channel = if valid {
        channel_from_frames(x, &y, m, 1e-6).ok()
    } else {
        None
    };
    Ok(CertificateReport {
        valid,
        reduction_residual,
        gram_residual,
        channel,
    })
}

fn ensure_tp(ch: &KrausChannel) -> Result<()> {
    let defect = ch.tp_defect();
    if defect > CLASS_FLAG_TOL {
        return Err(Error::NotTracePreserving(defect));
    }
    Ok(())
}

/// Channel with the fewest Kraus operators (Choi rank) realizing `ch`.
fn minimal(ch: &KrausChannel) -> Result<KrausChannel> {
    kraus_from_choi(&choi_from_kraus(ch))
}

/// `y_i = S x_i` with `S` the stacked Kraus operators of `ch` after
/// reducing them to the Choi rank.
pub fn extract_purification_certificate(
    ch: &KrausChannel,
    x: &CMatrix,
) -> Result<PurificationCertificate> {
    ensure_tp(ch)?;
    if x.nrows() != ch.in_dim() {
        return Err(Error::ShapeMismatch {
            expected: (ch.in_dim(), x.ncols()),
            got: x.shape(),
        });
    }
    let ch = minimal(ch)?;
    let s = ch.stacked();
    let r = ch.len();
    let purifications = columns(x)
        .iter()
        .map(|xi| Purification::new(r, &s * xi))
        .collect::<Result<Vec<_>>>()?;
    PurificationCertificate::new(x, purifications)
}

/// `V_i` (m x r) with `x_i* x_j = tr sqrt(B_i) sqrt(B_j) V_j V_i*`.
#[derive(Debug, Clone)]
pub struct IsometryCertificate {
    pub isometries: Vec<CMatrix>,
}

/// `V_i = sqrt(B_i)^+ Y_i`, where the blocks of `y_i` are the columns of `Y_i`.
pub fn isometry_certificate_from_purifications(
    targets: &[CMatrix],
    cert: &PurificationCertificate,
) -> Result<IsometryCertificate> {
    let isometries = cert
        .purifications
        .iter()
        .zip(targets)
        .map(|(p, b)| {
            let yi = CMatrix::from_column_slice(p.system_dim(), p.ancilla_dim, p.vector.as_slice());
            Ok(pinv(&sqrt_psd(b)?) * yi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IsometryCertificate { isometries })
}

pub fn verify_isometry_certificate(
    x: &CMatrix,
    targets: &[CMatrix],
    cert: &IsometryCertificate,
) -> Result<CertificateReport> {
    let k = x.ncols();
    if targets.len() != k || cert.isometries.len() != k {
        return Err(Error::InvalidProblem(format!(
            "{k} inputs, {} targets, {} isometries",
            targets.len(),
            cert.isometries.len()
        )));
    }
    let roots = targets.iter().map(sqrt_psd).collect::<Result<Vec<_>>>()?;
    let mut reduction_residual: f64 = 0.0;
    for ((s, v), b) in roots.iter().zip(&cert.isometries).zip(targets) {
        if v.nrows() != s.nrows() {
            return Err(Error::ShapeMismatch {
                expected: (s.nrows(), v.ncols()),
                got: v.shape(),
            });
        }
        reduction_residual = reduction_residual.max(max_abs(&(s * v * v.adjoint() * s - b)));
    }
    let gx = x.adjoint() * x;
    let mut gram_residual: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let (vi, vj) = (&cert.isometries[i], &cert.isometries[j]);
            if vi.ncols() != vj.ncols() {
                return Err(Error::ShapeMismatch {
                    expected: vi.shape(),
                    got: vj.shape(),
                });
            }
            let t = (&roots[i] * &roots[j] * vj * vi.adjoint()).trace();
            gram_residual = gram_residual.max((gx[(i, j)] - t).norm());
        }
    }
    Ok(CertificateReport {
        valid: reduction_residual <= VERIFY_TOL && gram_residual <= VERIFY_TOL,
        reduction_residual,
        gram_residual,
        channel: None,
    })
}

/// Result of the correlation-form check.
#[derive(Debug, Clone)]
pub enum CorrelationForm {
    /// Tensored canonical purifications certify a channel.
    Feasible(Box<Certificate>),
    /// The sufficient condition does not hold for the canonical
    /// purifications; this says nothing about the problem itself.
    SufficientConditionFailed(String),
}

impl CorrelationForm {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CorrelationForm::Feasible(_))
    }
}

/// Canonical (Schmidt-form) purifications of the targets.
pub fn canonical_purifications(targets: &[CMatrix]) -> Result<Vec<Purification>> {
    let r = targets
        .iter()
        .map(|b| Ok(crate::states::spectral_factor(b)?.rank()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1)
        .max(1);
    targets.iter().map(|b| purify(b, r, None)).collect()
}

/// Looks for a correlation `M` with `X* X = M ∘ Y* Y` where `y_i` are the
/// canonical purifications of the targets; success builds the channel
/// through `c_i ⊗ y_i`.
pub fn correlation_form_check(
    x: &CMatrix,
    targets: &[CMatrix],
    opts: &PureOptions,
) -> CorrelationForm {
    let route = "correlation-form";
    let failed = |s: String| CorrelationForm::SufficientConditionFailed(s);
    let (purifications, problem) =
        match (canonical_purifications(targets), tpcp_problem(x, targets)) {
            (Ok(p), Ok(q)) => (p, q),
            (Err(e), _) | (_, Err(e)) => return failed(e.to_string()),
        };
    let m = targets[0].nrows();
    let y = match purification_frame(&purifications) {
        Ok(y) => y,
        Err(e) => return failed(e.to_string()),
    };
    let g = match GramPair::new(x.clone(), y.clone()) {
        Ok(g) => g,
        Err(e) => return failed(e.to_string()),
    };
    let pure = decide_pure_tpcp(&g, opts);
    let Some(corr) = pure.correlation.as_ref().filter(|_| pure.is_feasible()) else {
        return failed(format!(
            "no correlation matrix for the canonical purifications: {}",
            pure.evidence
        ));
    };
    let corr = match CorrelationMatrix::from_approximate(corr) {
        Ok(c) => c,
        Err(e) => return failed(e.to_string()),
    };
    let c = corr.factor();
    let frame: Vec<CVector> = (0..g.k())
        .map(|i| {
            let ci = c.column(i).into_owned();
            crate::linalg::kron_vec(&ci.unscale(ci.norm()), &y.column(i).into_owned())
        })
        .collect();
    let ch = match channel_from_frames(x, &CMatrix::from_columns(&frame), m, 1e-6) {
        Ok(ch) => ch,
        Err(e) => return failed(e.to_string()),
    };
    let res = verify_channel(&problem, &ch).expect("dimensions match");
    if !res.within(VERIFY_TOL) {
        return failed(format!(
            "tensored purifications miss the targets by {:.3e}",
            res.max()
        ));
    }
    let cert = Certificate::feasible(route, ch, res)
        .with_iterations(pure.iterations)
        .with_correlation(corr.matrix().clone());
    CorrelationForm::Feasible(Box::new(cert))
}

/// `V_ij` (s_i x s) indexed by state `i` and input eigen-index `j`.
#[derive(Debug, Clone)]
pub struct GeneralCertificate {
    pub blocks: Vec<Vec<CMatrix>>,
}

/// Checks `Σ_j V_ij V_ij* = I` and
/// `(D_i X_i* X_j D_j)_pq = tr(V_ip* D̃_i Y_i* Y_j D̃_j V_jq)`.
pub fn verify_general_certificate(
    inputs: &[SpectralFactor],
    targets: &[SpectralFactor],
    cert: &GeneralCertificate,
) -> Result<CertificateReport> {
    let k = inputs.len();
    if targets.len() != k || cert.blocks.len() != k {
        return Err(Error::InvalidProblem(format!(
            "{k} inputs, {} targets, {} certificate rows",
            targets.len(),
            cert.blocks.len()
        )));
    }
    let s = cert
        .blocks
        .first()
        .and_then(|b| b.first())
        .map_or(0, |v| v.ncols());
    let mut reduction_residual: f64 = 0.0;
    for i in 0..k {
        let si = targets[i].rank();
        if cert.blocks[i].len() != inputs[i].rank() {
            return Err(Error::ShapeMismatch {
                expected: (inputs[i].rank(), 1),
                got: (cert.blocks[i].len(), 1),
            });
        }
        let mut sum = CMatrix::zeros(si, si);
        for v in &cert.blocks[i] {
            if v.shape() != (si, s) {
                return Err(Error::ShapeMismatch {
                    expected: (si, s),
                    got: v.shape(),
                });
            }
            sum += v * v.adjoint();
        }
        reduction_residual = reduction_residual.max(max_abs(&(sum - identity(si))));
    }
    let mut gram_residual: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let lhs = inputs[i].scaled().adjoint() * inputs[j].scaled();
            let mid = targets[i].scaled().adjoint() * targets[j].scaled();
            for p in 0..inputs[i].rank() {
                for q in 0..inputs[j].rank() {
                    let t = (cert.blocks[i][p].adjoint() * &mid * &cert.blocks[j][q]).trace();
                    gram_residual = gram_residual.max((lhs[(p, q)] - t).norm());
                }
            }
        }
    }
    Ok(CertificateReport {
        valid: reduction_residual <= VERIFY_TOL && gram_residual <= VERIFY_TOL,
        reduction_residual,
        gram_residual,
        channel: None,
    })
}

/// Solves `F_l X_i D_i e_j = Y_i D̃_i c^l_ij` and sets `V_ij = [c^1_ij | ... | c^s_ij]`.
pub fn extract_general_certificate(
    ch: &KrausChannel,
    inputs: &[SpectralFactor],
    targets: &[SpectralFactor],
) -> Result<GeneralCertificate> {
    ensure_tp(ch)?;
    if inputs.len() != targets.len() {
        return Err(Error::InvalidProblem(format!(
            "{} inputs and {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let mut blocks = Vec::with_capacity(inputs.len());
    for (a, b) in inputs.iter().zip(targets) {
        if a.isometry.nrows() != ch.in_dim() || b.isometry.nrows() != ch.out_dim() {
            return Err(Error::ShapeMismatch {
                expected: (ch.in_dim(), ch.out_dim()),
                got: (a.isometry.nrows(), b.isometry.nrows()),
            });
        }
        let image = ch.apply(&a.reconstruct())?;
        let miss = max_abs(&(image - b.reconstruct()));
        if miss > REDUCTION_TOL {
            return Err(Error::Inconsistent(miss));
        }
        let yd = b.scaled();
        let yd_pinv = pinv(&yd);
        let xd = a.scaled();
        let mut row = Vec::with_capacity(a.rank());
        for j in 0..a.rank() {
            let mut v = CMatrix::zeros(b.rank(), ch.len());
            for (l, f) in ch.operators().iter().enumerate() {
                let w = f * xd.column(j);
                let c = &yd_pinv * &w;
                let miss = (&yd * &c - &w).norm();
                if miss > VERIFY_TOL {
                    return Err(Error::Inconsistent(miss));
                }
                v.set_column(l, &c);
            }
            row.push(v);
        }
        blocks.push(row);
    }
    Ok(GeneralCertificate { blocks })
}
