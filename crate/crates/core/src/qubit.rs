//! Complete decision procedures for trace-preserving CP maps between qubit
//! states, for any number of input/target pairs.
//!
//! Linearly dependent inputs are filtered first (their targets must obey the
//! same relation), leaving at most four independent pairs:
//!
//! * one pair: the replacement map `X -> tr(X) B_1` always works;
//! * two pairs: the inputs are rewritten as two pure states and the question
//!   becomes `|x_1* x_2| <= F(B_1, B_2)`;
//! * three pairs: three pure states on a common circle of the Bloch sphere,
//!   and a search for a 2x2 contraction in a three-parameter affine family;
//! * four pairs: the map is unique and its Choi matrix is checked.

use std::f64::consts::PI;

use crate::certificate::{Certificate, Evidence, Verdict, VERIFY_TOL};
use crate::choi::oracle::{decide_general, OracleOptions};
use crate::choi::screen::{check_trace_norm_condition, BOUNDARY_TOL};
use crate::choi::{
    channel_from_frames, kraus_from_choi, replacement_channel, verify_channel, ChoiMatrix,
    FeasibilityProblem, KrausChannel, MapClass,
};
use crate::convex::{herm_to_real, linear_map_matrix, AffineSet, RVector};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, herm_eig_unchecked, hermitian_part, matrix_unit, solve, svd, vectorize, CMatrix, CVector,
};
use crate::states::{reduce_qubit_pair, DensityMatrix, PureState};

#[derive(Debug, Clone)]
pub struct QubitOptions {
    /// Width of the band around the feasibility boundary.
    pub boundary_tol: f64,
    /// Grid for the informational trace-norm check; default grid when `None`.
    pub t_grid: Option<Vec<f64>>,
    /// Iteration cap for the contraction search with three pairs.
    pub max_iter: usize,
}

impl Default for QubitOptions {
    fn default() -> Self {
        Self {
            boundary_tol: BOUNDARY_TOL,
            t_grid: None,
            max_iter: 5000,
        }
    }
}

/// Gap above which the contraction search reports separation.
const SEPARATION_GAP: f64 = 1e-5;
/// Relative residual below which an input counts as a combination of earlier ones.
const DEPENDENCE_RTOL: f64 = 1e-5;

/// Qubit density matrices `A_i` and targets `B_i`.
#[derive(Debug, Clone)]
pub struct QubitProblem {
    inputs: Vec<DensityMatrix>,
    targets: Vec<DensityMatrix>,
}

impl QubitProblem {
    pub fn new(inputs: Vec<DensityMatrix>, targets: Vec<DensityMatrix>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::InvalidProblem(format!(
                "{} inputs and {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        for d in inputs.iter().chain(&targets) {
            if d.dim() != 2 {
                return Err(Error::ShapeMismatch {
                    expected: (2, 2),
                    got: d.matrix().shape(),
                });
            }
        }
        Ok(Self { inputs, targets })
    }

    /// Accepts a TPCP problem whose inputs and targets are qubit density matrices.
    pub fn from_problem(p: &FeasibilityProblem) -> Result<Self> {
        if p.class() != MapClass::Tpcp || p.identity_image().is_some() {
            return Err(Error::InvalidProblem(
                "qubit procedures decide plain TPCP problems".into(),
            ));
        }
        let inputs = p
            .inputs()
            .iter()
            .map(|a| DensityMatrix::new(a.clone()))
            .collect::<Result<Vec<_>>>()?;
        let targets = p
            .targets()
            .iter()
            .map(|b| DensityMatrix::new(b.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn targets(&self) -> &[DensityMatrix] {
        &self.targets
    }

    pub fn to_problem(&self) -> FeasibilityProblem {
        FeasibilityProblem::new(
            self.inputs.iter().map(|d| d.matrix().clone()).collect(),
            self.targets.iter().map(|d| d.matrix().clone()).collect(),
            MapClass::Tpcp,
        )
        .expect("validated densities form a valid problem")
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }
}

/// `C = C_0 + sum_i params_i C_i` with `||C|| <= 1` when feasible.
#[derive(Debug, Clone)]
pub struct ContractionWitness {
    pub c: CMatrix,
    pub offset: CMatrix,
    pub directions: Vec<CMatrix>,
    pub params: Vec<f64>,
}

fn finish(route: &str, p: &FeasibilityProblem, ch: KrausChannel) -> Certificate {
    let residuals = verify_channel(p, &ch).expect("channel dimensions match the problem");
    if residuals.within(VERIFY_TOL) {
        Certificate::feasible(route, ch, residuals)
    } else {
        Certificate::indeterminate(
            route,
            Evidence::ConditionViolated(format!(
                "constructed channel misses the targets by {:.3e}",
                residuals.max()
            )),
        )
    }
}

/// Decides any qubit TPCP instance, filtering linearly dependent inputs first.
pub fn decide_qubit(p: &QubitProblem, opts: &QubitOptions) -> Certificate {
    let full = p.to_problem();
    let mut basis: Vec<CVector> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    for (i, a) in p.inputs.iter().enumerate() {
        let v = vectorize(a.matrix());
        let mut r = v.clone();
        for q in &basis {
            let proj = q.dotc(&r);
            r -= q * proj;
        }
        if r.norm() > DEPENDENCE_RTOL * v.norm() {
            basis.push(r.unscale(r.norm()));
            selected.push(i);
        } else {
            let s = CMatrix::from_fn(4, selected.len(), |row, c| {
                vectorize(p.inputs[selected[c]].matrix())[row]
            });
            let coef = crate::linalg::pinv(&s) * &v;
            let mut predicted = CMatrix::zeros(2, 2);
            for (c, &j) in selected.iter().enumerate() {
                predicted += p.targets[j].matrix() * coef[c];
            }
            let miss = (predicted - p.targets[i].matrix()).norm();
            let scale = 1.0 + coef.iter().map(|z| z.norm()).sum::<f64>();
            if miss > opts.boundary_tol * scale {
                return Certificate::infeasible(
                    "qubit-dependent-inputs",
                    Evidence::ConditionViolated(format!(
                        "input {} is a combination of earlier inputs but its target misses \
                         the same combination by {miss:.3e}",
                        i + 1
                    )),
                );
            }
        }
    }
    let reduced = p.subset(&selected);
    let mut cert = match selected.len() {
        1 => decide_qubit_k1(&reduced.targets[0]),
        2 => decide_qubit_k2(
            &reduced.inputs[0],
            &reduced.inputs[1],
            &reduced.targets[0],
            &reduced.targets[1],
            opts,
        ),
        3 => decide_qubit_k3(&reduced, opts),
        _ => decide_qubit_k4(&reduced, opts),
    };
    if selected.len() < p.len() {
        cert.warnings.push(format!(
            "{} linearly dependent input(s) filtered before deciding",
            p.len() - selected.len()
        ));
        if let Some(ch) = cert.channel.take() {
            let route = cert.route.clone();
            let mut redone = finish(&route, &full, ch);
            redone.screens = cert.screens;
            redone.warnings = cert.warnings;
            return redone;
        }
    }
    cert
}

/// The replacement map `X -> tr(X) B_1`.
pub fn decide_qubit_k1(b1: &DensityMatrix) -> Certificate {
    let n = b1.dim();
    let p = FeasibilityProblem::new(
        vec![crate::linalg::identity(n).scale(1.0 / n as f64)],
        vec![b1.matrix().clone()],
        MapClass::Tpcp,
    )
    .expect("valid problem");
    match replacement_channel(n, b1.matrix()) {
        Ok(ch) => finish("qubit-k1", &p, ch),
        Err(e) => {
            Certificate::indeterminate("qubit-k1", Evidence::ConditionViolated(e.to_string()))
        }
    }
}

fn clipped_sqrt(h: &CMatrix) -> CMatrix {
    herm_eig_unchecked(h).map(|v| v.max(0.0).sqrt())
}

/// Two pairs: rewrite the inputs as pure states `x_1, x_2`, apply the same
/// combinations to the targets, and compare `|x_1* x_2|` with the fidelity
/// of the combined targets.
pub fn decide_qubit_k2(
    a1: &DensityMatrix,
    a2: &DensityMatrix,
    b1: &DensityMatrix,
    b2: &DensityMatrix,
    opts: &QubitOptions,
) -> Certificate {
    let full = FeasibilityProblem::new(
        vec![a1.matrix().clone(), a2.matrix().clone()],
        vec![b1.matrix().clone(), b2.matrix().clone()],
        MapClass::Tpcp,
    )
    .expect("valid problem");
    let screen = check_trace_norm_condition(
        a1.matrix(),
        a2.matrix(),
        b1.matrix(),
        b2.matrix(),
        opts.t_grid.as_deref(),
        opts.boundary_tol,
    );
    let red = match reduce_qubit_pair(a1, a2) {
        Ok(r) => r,
        Err(Error::LinearlyDependent(_)) => {
            let p = QubitProblem::new(vec![a1.clone(), a2.clone()], vec![b1.clone(), b2.clone()])
                .expect("qubit densities");
            return decide_qubit(&p, opts);
        }
        Err(e) => {
            let mut c = decide_general(&full, &OracleOptions::default());
            c.route = format!("qubit-k2/{}", c.route);
            c.warnings.push(format!("pure-state reduction failed: {e}"));
            return c;
        }
    };
    let (bt1, bt2) = red.apply(b1.matrix(), b2.matrix());
    let mut cert = decide_reduced_pair(&red.x1, &red.x2, &bt1, &bt2, &full, opts);
    cert.screens.push(screen);
    cert
}

fn decide_reduced_pair(
    x1: &PureState,
    x2: &PureState,
    bt1: &CMatrix,
    bt2: &CMatrix,
    full: &FeasibilityProblem,
    opts: &QubitOptions,
) -> Certificate {
    let route = "qubit-k2";
    for (i, b) in [bt1, bt2].into_iter().enumerate() {
        let min = herm_eig_unchecked(b).min();
        if min < -opts.boundary_tol {
            return Certificate::infeasible(
                route,
                Evidence::ConditionViolated(format!(
                    "the target combination matching pure input {} is not PSD (eigenvalue {min:.6e})",
                    i + 1
                )),
            );
        }
    }
    let s1 = clipped_sqrt(bt1);
    let s2 = clipped_sqrt(bt2);
    let dec = svd(&(&s1 * &s2));
    let fid: f64 = dec.values.iter().sum();
    let overlap = x1.vector().dotc(x2.vector());
    let margin = overlap.norm() - fid;
    if margin > opts.boundary_tol {
        return Certificate::infeasible(
            route,
            Evidence::ConditionViolated(format!(
                "overlap {:.9} of the pure inputs exceeds the target fidelity {fid:.9}",
                overlap.norm()
            )),
        );
    }
    // V attains the trace norm: tr(sqrt(B1) sqrt(B2) V) = F.
    let v = &dec.v * dec.u.adjoint();
    let y = vectorize(&s1);
    let z = vectorize(&(&s2 * v));
    let yz = y.dotc(&z);
    let mut delta = if yz.norm() < 1e-14 {
        c64(1.0, 0.0)
    } else {
        overlap / yz
    };
    if delta.norm() > 1.0 {
        delta /= delta.norm();
    }
    let rest = (1.0 - delta.norm_sqr()).max(0.0).sqrt();
    let mut frame_y = CMatrix::zeros(8, 2);
    frame_y.view_mut((0, 0), (4, 1)).copy_from(&y);
    frame_y.view_mut((0, 1), (4, 1)).copy_from(&(&z * delta));
    frame_y
        .view_mut((4, 1), (4, 1))
        .copy_from(&(&z * c64(rest, 0.0)));
    let mut frame_x = CMatrix::zeros(2, 2);
    frame_x.set_column(0, x1.vector());
    frame_x.set_column(1, x2.vector());
    match channel_from_frames(&frame_x, &frame_y, 2, 1e-6) {
        Ok(ch) => finish(route, full, ch),
        Err(e) => Certificate::indeterminate(route, Evidence::ConditionViolated(e.to_string())),
    }
}

fn bloch(a: &CMatrix) -> [f64; 3] {
    [
        2.0 * a[(0, 1)].re,
        -2.0 * a[(0, 1)].im,
        2.0 * a[(0, 0)].re - 1.0,
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit3(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Pure states on the circle where the affine plane of three qubit states
/// meets the Bloch sphere, together with the affine weights (rows sum to
/// one) expressing each as a combination of the given states.
fn pure_circle(a: [&CMatrix; 3]) -> Result<([PureState; 3], [[f64; 3]; 3])> {
    let r = [bloch(a[0]), bloch(a[1]), bloch(a[2])];
    let normal = cross3(sub3(r[1], r[0]), sub3(r[2], r[0]));
    if dot3(normal, normal).sqrt() < 1e-12 {
        return Err(Error::LinearlyDependent(dot3(normal, normal)));
    }
    let nrm = unit3(normal);
    let h = dot3(nrm, r[0]);
    let center = [h * nrm[0], h * nrm[1], h * nrm[2]];
    let rho2 = 1.0 - h * h;
    if rho2 <= 1e-12 {
        return Err(Error::DecompositionDegenerate(
            "plane of the inputs only touches the Bloch sphere".into(),
        ));
    }
    let rho = rho2.sqrt();
    let u = unit3(sub3(r[1], r[0]));
    let v = cross3(nrm, u);
    let coords = |p: [f64; 3]| {
        let d = sub3(p, center);
        (dot3(d, u), dot3(d, v))
    };
    let mut m = CMatrix::zeros(3, 3);
    for (i, &ri) in r.iter().enumerate() {
        let (cu, cv) = coords(ri);
        m[(0, i)] = c64(cu, 0.0);
        m[(1, i)] = c64(cv, 0.0);
        m[(2, i)] = c64(1.0, 0.0);
    }
    let mut rhs = CMatrix::zeros(3, 3);
    for k in 0..3 {
        let th = 2.0 * PI * k as f64 / 3.0;
        rhs[(0, k)] = c64(rho * th.cos(), 0.0);
        rhs[(1, k)] = c64(rho * th.sin(), 0.0);
        rhs[(2, k)] = c64(1.0, 0.0);
    }
    let w = solve(&m, &rhs).ok_or(Error::LinearlyDependent(0.0))?;
    let mut weights = [[0.0; 3]; 3];
    let mut states = Vec::with_capacity(3);
    for k in 0..3 {
        let mut pk = CMatrix::zeros(2, 2);
        for i in 0..3 {
            weights[k][i] = w[(i, k)].re;
            pk += a[i].scale(weights[k][i]);
        }
        let eig = herm_eig_unchecked(&hermitian_part(&pk));
        states.push(PureState::normalized(eig.vectors.column(0).into_owned())?);
    }
    let [s0, s1, s2]: [PureState; 3] = states.try_into().expect("three states");
    Ok(([s0, s1, s2], weights))
}

/// Real coordinates of a 2x2 complex matrix: `(Re Q_ab, Im Q_ab)` row-major.
fn matrix_from_coords(q: &[f64]) -> CMatrix {
    CMatrix::from_fn(2, 2, |a, b| c64(q[2 * (2 * a + b)], q[2 * (2 * a + b) + 1]))
}

fn coords_from_matrix(m: &CMatrix) -> RVector {
    let mut v = RVector::zeros(8);
    for a in 0..2 {
        for b in 0..2 {
            v[2 * (2 * a + b)] = m[(a, b)].re;
            v[2 * (2 * a + b) + 1] = m[(a, b)].im;
        }
    }
    v
}

fn clip_operator_norm(q: &RVector, radius: f64) -> RVector {
    let m = matrix_from_coords(q.as_slice());
    let dec = svd(&m);
    if dec.values.first().copied().unwrap_or(0.0) <= radius {
        return q.clone();
    }
    let s = crate::linalg::diag(
        &dec.values
            .iter()
            .map(|&v| v.min(radius))
            .collect::<Vec<_>>(),
    );
    coords_from_matrix(&(&dec.u * s * dec.v.adjoint()))
}

/// Alternating projections between `affine` and the operator-norm ball of
/// the given radius. Returns the last affine point, the last ball point and
/// the final gap.
fn alternate(affine: &AffineSet, radius: f64, max_iter: usize) -> (RVector, RVector, f64) {
    let mut a = affine.offset().clone();
    let mut b = clip_operator_norm(&a, radius);
    let mut gap = (&a - &b).norm();
    for _ in 0..max_iter {
        a = affine.project(&b);
        b = clip_operator_norm(&a, radius);
        let next = (&a - &b).norm();
        let done = next < 1e-13 || (gap - next).abs() < 1e-10 * 1e-2;
        gap = next;
        if done {
            break;
        }
    }
    (a, b, gap)
}

/// Three pairs: search for a contraction `Q` with `T(x_1 x_2*) = sqrt(B_1) Q sqrt(B_2)`.
pub fn decide_qubit_k3(p: &QubitProblem, opts: &QubitOptions) -> Certificate {
    let route = "qubit-k3";
    let full = p.to_problem();
    if p.len() != 3 {
        return Certificate::indeterminate(
            route,
            Evidence::ConditionViolated(format!("expected three pairs, got {}", p.len())),
        );
    }
    let a = [
        p.inputs[0].matrix(),
        p.inputs[1].matrix(),
        p.inputs[2].matrix(),
    ];
    let (xs, w) = match pure_circle(a) {
        Ok(v) => v,
        Err(Error::LinearlyDependent(_)) => {
            let mut c = decide_qubit(p, opts);
            c.warnings.push("inputs are affinely dependent".into());
            return c;
        }
        Err(e) => {
            let mut c = decide_general(&full, &OracleOptions::default());
            c.route = format!("{route}/{}", c.route);
            c.warnings.push(format!("pure-state reduction failed: {e}"));
            return c;
        }
    };
    let bs: Vec<CMatrix> = (0..3)
        .map(|k| {
            (0..3).fold(CMatrix::zeros(2, 2), |acc, i| {
                acc + p.targets[i].matrix().scale(w[k][i])
            })
        })
        .collect();
    for (k, b) in bs.iter().enumerate() {
        let min = herm_eig_unchecked(b).min();
        if min < -opts.boundary_tol {
            return Certificate::infeasible(
                route,
                Evidence::ConditionViolated(format!(
                    "the target combination matching pure state {} is not PSD (eigenvalue {min:.6e})",
                    k + 1
                )),
            );
        }
    }
    match contraction_search(&xs, &bs, opts) {
        Ok((Verdict::Feasible, Some(witness), gap)) => {
            let x1 = xs[0].vector();
            let x2 = xs[1].vector();
            let s1 = clipped_sqrt(&bs[0]);
            let s2 = clipped_sqrt(&bs[1]);
            let q = &witness.c;
            let defect = (crate::linalg::identity(2) - q.adjoint() * q).map(|z| z);
            let root = clipped_sqrt(&hermitian_part(&defect));
            let mut frame_y = CMatrix::zeros(8, 2);
            frame_y.view_mut((0, 0), (4, 1)).copy_from(&vectorize(&s1));
            frame_y
                .view_mut((0, 1), (4, 1))
                .copy_from(&vectorize(&(&s2 * q.adjoint())));
            frame_y
                .view_mut((4, 1), (4, 1))
                .copy_from(&vectorize(&(&s2 * root)));
            let mut frame_x = CMatrix::zeros(2, 2);
            frame_x.set_column(0, x1);
            frame_x.set_column(1, x2);
            let mut c = match channel_from_frames(&frame_x, &frame_y, 2, 1e-6) {
                Ok(ch) => finish(route, &full, ch),
                Err(e) => {
                    Certificate::indeterminate(route, Evidence::ConditionViolated(e.to_string()))
                }
            };
            c.iterations = 0;
            if c.verdict != Verdict::Feasible {
                c.warnings.push(format!("contraction gap {gap:.3e}"));
            }
            c
        }
        Ok((Verdict::Infeasible, _, gap)) => Certificate::infeasible(
            route,
            Evidence::ConditionViolated(format!(
                "no contraction satisfies the linear constraints (distance {gap:.3e})"
            )),
        ),
        Ok((_, _, gap)) => Certificate::indeterminate(
            route,
            Evidence::ConditionViolated(format!("contraction search ended at distance {gap:.3e}")),
        ),
        Err(e) => Certificate::indeterminate(route, Evidence::ConditionViolated(e.to_string())),
    }
}

/// Solves for the contraction given three pure inputs `xs` (pairwise
/// independent) and their PSD targets `bs`.
pub fn contraction_search(
    xs: &[PureState; 3],
    bs: &[CMatrix],
    opts: &QubitOptions,
) -> Result<(Verdict, Option<ContractionWitness>, f64)> {
    let mut frame = CMatrix::zeros(2, 2);
    frame.set_column(0, xs[0].vector());
    frame.set_column(1, xs[1].vector());
    let beta = solve(
        &frame,
        &CMatrix::from_column_slice(2, 1, xs[2].vector().as_slice()),
    )
    .ok_or_else(|| Error::DecompositionDegenerate("first two pure states are parallel".into()))?;
    let alpha = [beta[(0, 0)].norm(), beta[(1, 0)].norm()];
    if alpha[0] < 1e-12 || alpha[1] < 1e-12 {
        return Err(Error::DecompositionDegenerate(format!(
            "third pure state is parallel to one of the others (coefficients {:.3e}, {:.3e})",
            alpha[0], alpha[1]
        )));
    }
    let phase = |z: crate::linalg::C64| z.arg().rem_euclid(2.0 * PI);
    let theta = phase(beta[(0, 0)]) - phase(beta[(1, 0)]);
    let rot = c64(theta.cos(), theta.sin());
    let bt3 = (&bs[2] - bs[0].scale(alpha[0] * alpha[0]) - bs[1].scale(alpha[1] * alpha[1]))
        .scale(1.0 / (2.0 * alpha[0] * alpha[1]));
    let s1 = clipped_sqrt(&bs[0]);
    let s2 = clipped_sqrt(&bs[1]);
    let overlap = xs[1].vector().dotc(xs[0].vector());

    let a = linear_map_matrix(8, 6, |q| {
        let z = &s1 * matrix_from_coords(q.as_slice()) * &s2;
        let tr = z.trace();
        let h = herm_to_real(&hermitian_part(&(z * rot)));
        RVector::from_vec(vec![tr.re, tr.im, h[0], h[1], h[2], h[3]])
    });
    let h = herm_to_real(&hermitian_part(&bt3));
    let rhs = RVector::from_vec(vec![overlap.re, overlap.im, h[0], h[1], h[2], h[3]]);
    let affine = AffineSet::least_squares(&a, &rhs);
    if affine.residual() > opts.boundary_tol {
        let verdict = if affine.residual() > SEPARATION_GAP {
            Verdict::Infeasible
        } else {
            Verdict::Indeterminate
        };
        return Ok((verdict, None, affine.residual()));
    }
    let null = affine.null_space();
    let witness = |q: &RVector| {
        let offset = affine.offset();
        let params = (null.transpose() * (q - offset)).iter().copied().collect();
        ContractionWitness {
            c: matrix_from_coords(q.as_slice()),
            offset: matrix_from_coords(offset.as_slice()),
            directions: (0..null.ncols())
                .map(|j| matrix_from_coords(null.column(j).as_slice()))
                .collect(),
            params,
        }
    };

    let (aff, _, gap) = alternate(&affine, 1.0 - 1e-6, opts.max_iter);
    if gap <= opts.boundary_tol
        && crate::linalg::operator_norm(&matrix_from_coords(aff.as_slice())) <= 1.0
    {
        return Ok((Verdict::Feasible, Some(witness(&aff)), gap));
    }
    let (_, ball, gap) = alternate(&affine, 1.0, opts.max_iter);
    if gap <= opts.boundary_tol {
        Ok((Verdict::Feasible, Some(witness(&ball)), gap))
    } else if gap > SEPARATION_GAP {
        Ok((Verdict::Infeasible, None, gap))
    } else {
        Ok((Verdict::Indeterminate, None, gap))
    }
}

/// Four pairs: the inputs form a basis, so the linear map is unique; it is
/// feasible exactly when it preserves traces and its Choi matrix is PSD.
#[allow(clippy::needless_range_loop)]
pub fn decide_qubit_k4(p: &QubitProblem, opts: &QubitOptions) -> Certificate {
    let route = "qubit-k4";
    let full = p.to_problem();
    if p.len() != 4 {
        return Certificate::indeterminate(
            route,
            Evidence::ConditionViolated(format!("expected four pairs, got {}", p.len())),
        );
    }
    let s = CMatrix::from_fn(4, 4, |r, c| vectorize(p.inputs[c].matrix())[r]);
    let mut images = vec![vec![CMatrix::zeros(2, 2); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let e = vectorize(&matrix_unit(2, a, b));
            let Some(coef) = solve(&s, &CMatrix::from_column_slice(4, 1, e.as_slice())) else {
                let mut c = decide_qubit(p, opts);
                c.warnings.push("inputs do not form a basis".into());
                return c;
            };
            images[a][b] = (0..4).fold(CMatrix::zeros(2, 2), |acc, i| {
                acc + p.targets[i].matrix() * coef[(i, 0)]
            });
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            let tr = images[a][b].trace();
            let expected = if a == b { 1.0 } else { 0.0 };
            if (tr - c64(expected, 0.0)).norm() > 1e-8 {
                return Certificate::infeasible(
                    route,
                    Evidence::ConditionViolated(format!(
                        "the unique interpolating map sends E_{}{} to trace {tr}",
                        a + 1,
                        b + 1
                    )),
                );
            }
        }
    }
    let choi = ChoiMatrix::from_images(2, 2, |a, b| images[a][b].clone());
    let eig = herm_eig_unchecked(choi.matrix());
    if eig.min() < -eig.psd_tol() {
        return Certificate::infeasible(route, Evidence::NegativeChoiEigenvalue(eig.min()));
    }
    let clipped =
        ChoiMatrix::new(2, 2, eig.map(|v| v.max(0.0))).expect("Hermitian by construction");
    match kraus_from_choi(&clipped) {
        Ok(ch) => finish(route, &full, ch),
        Err(e) => Certificate::indeterminate(route, Evidence::ConditionViolated(e.to_string())),
    }
}
