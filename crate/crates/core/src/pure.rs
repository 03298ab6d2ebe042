//! Interpolation between pure states `x_i x_i* -> y_i y_i*`.
//!
//! Every question here reduces to finding a correlation matrix `M` (PSD,
//! unit diagonal) subject to linear constraints, possibly together with a
//! PSD slack `Z`:
//!
//! * TPCP: `X* X = M ∘ Y* Y`;
//! * CP: `ker X* X ⊆ ker (M ∘ Y* Y)`;
//! * CP with `T(I) = B`: the CP constraint plus `Y [conj(M) ∘ (X* X)^+] Y* + Z = B`,
//!   with `Z = 0` when `X` has full row rank;
//! * unital CP: `B = I`; unital TPCP: `m = n`, the TPCP equality and `B = I`.
//!
//! When the constraints pin `M` down completely a single eigenvalue check
//! decides; otherwise Dykstra's algorithm searches the feasible set.

use crate::certificate::{Certificate, Evidence};
use crate::choi::{
    channel_from_frames, verify_channel, FeasibilityProblem, KrausChannel, MapClass,
};
use crate::convex::{
    dykstra, herm_coords, herm_to_real, linear_map_matrix, polish_low_rank, real_to_herm,
    write_herm, AffineSet, DykstraOptions, DykstraStatus, PsdProduct, RVector,
};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, hadamard, herm_eig_unchecked, identity, kron_vec, outer, pinv_with_rtol, range_basis,
    CMatrix, CVector, C64,
};

/// `|(Y* Y)_ij|` at or below this counts as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// Nonzero `|(Y* Y)_ij|` below this makes the forced quotient ill-conditioned.
pub const CONDITIONING_WARN: f64 = 1e-6;
/// Eigenvalues of `X* X` below this fraction of the largest span its kernel.
pub const KERNEL_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PureOptions {
    pub zero_tol: f64,
    pub boundary_tol: f64,
    pub dykstra: DykstraOptions,
}

impl Default for PureOptions {
    fn default() -> Self {
        Self {
            zero_tol: ZERO_TOL,
            boundary_tol: crate::choi::screen::BOUNDARY_TOL,
            dykstra: DykstraOptions {
                feasible_tol: 1e-10,
                ..DykstraOptions::default()
            },
        }
    }
}

/// Input columns `X` (n x k), target columns `Y` (m x k) and their Gram matrices.
#[derive(Debug, Clone)]
pub struct GramPair {
    x: CMatrix,
    y: CMatrix,
    gx: CMatrix,
    gy: CMatrix,
}

impl GramPair {
    pub fn new(x: CMatrix, y: CMatrix) -> Result<Self> {
        if x.ncols() != y.ncols() || x.ncols() == 0 {
            return Err(Error::ShapeMismatch {
                expected: (y.nrows(), x.ncols()),
                got: y.shape(),
            });
        }
        if !crate::linalg::is_finite(&x) || !crate::linalg::is_finite(&y) {
            return Err(Error::NonFinite);
        }
        if let Some(i) = (0..x.ncols()).find(|&i| x.column(i).norm() == 0.0) {
            return Err(Error::InvalidProblem(format!("input {} is zero", i + 1)));
        }
        let gx = x.adjoint() * &x;
        let gy = y.adjoint() * &y;
        Ok(Self { x, y, gx, gy })
    }

    pub fn from_states(xs: &[CVector], ys: &[CVector]) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidProblem(format!(
                "{} inputs and {} targets",
                xs.len(),
                ys.len()
            )));
        }
        Self::new(CMatrix::from_columns(xs), CMatrix::from_columns(ys))
    }

    /// Recovers `x_i`, `y_i` (up to phase) when every input and target of
    /// `p` has rank at most one; `None` otherwise.
    pub fn from_problem(p: &FeasibilityProblem) -> Option<Self> {
        let xs = p
            .inputs()
            .iter()
            .map(rank_one_factor)
            .collect::<Option<Vec<_>>>()?;
        let ys = p
            .targets()
            .iter()
            .map(rank_one_factor)
            .collect::<Option<Vec<_>>>()?;
        Self::from_states(&xs, &ys).ok()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn in_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn gx(&self) -> &CMatrix {
        &self.gx
    }

    pub fn gy(&self) -> &CMatrix {
        &self.gy
    }

    /// The interpolation problem `x_i x_i* -> y_i y_i*` for the given class.
    pub fn problem(&self, class: MapClass) -> FeasibilityProblem {
        let proj = |m: &CMatrix, i: usize| outer(&m.column(i).into_owned());
        FeasibilityProblem::new(
            (0..self.k()).map(|i| proj(&self.x, i)).collect(),
            (0..self.k()).map(|i| proj(&self.y, i)).collect(),
            class,
        )
        .expect("projectors form a valid problem")
    }

    /// Orthonormal basis of the numerical kernel of `X* X`, as columns.
    pub fn kernel(&self) -> CMatrix {
        let eig = herm_eig_unchecked(&self.gx);
        let cut = KERNEL_RTOL * eig.max().max(0.0);
        let kept: Vec<usize> = (0..self.k()).filter(|&i| eig.values[i] <= cut).collect();
        CMatrix::from_fn(self.k(), kept.len(), |r, c| eig.vectors[(r, kept[c])])
    }

    fn rank_x(&self) -> usize {
        self.k() - self.kernel().ncols()
    }

    fn x_pinv(&self) -> CMatrix {
        pinv_with_rtol(&self.x, KERNEL_RTOL.sqrt())
    }
}

/// `x` with `a = x x*` (phase fixed), or `None` when `a` has rank above one.
pub fn rank_one_factor(a: &CMatrix) -> Option<CVector> {
    let eig = herm_eig_unchecked(a);
    let top = eig.max();
    if eig.min() < -eig.psd_tol() {
        return None;
    }
    if top <= 0.0 {
        return Some(CVector::zeros(a.nrows()));
    }
    if eig.values.len() > 1 && eig.values[1] > 1e-10 * top {
        return None;
    }
    let mut v = eig.vectors.column(0).into_owned() * c64(top.sqrt(), 0.0);
    crate::states::fix_phase(&mut v);
    Some(v)
}

/// PSD matrix with unit diagonal.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    matrix: CMatrix,
}

impl CorrelationMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = crate::linalg::ensure_hermitian(&matrix)?;
        let min = herm_eig_unchecked(&matrix).min();
        if min < -crate::linalg::PSD_RTOL * (n as f64) {
            return Err(Error::NotPsd(min));
        }
        for i in 0..n {
            let d = matrix[(i, i)].re;
            if (d - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProblem(format!(
                    "correlation diagonal entry {} is {d}",
                    i + 1
                )));
            }
        }
        Ok(Self { matrix })
    }

    /// Nearest correlation matrix obtained by clipping negative eigenvalues
    /// and rescaling to unit diagonal.
    pub fn from_approximate(m: &CMatrix) -> Result<Self> {
        let clipped = herm_eig_unchecked(&crate::linalg::hermitian_part(m)).map(|v| v.max(0.0));
        let k = m.nrows();
        let mut scale = Vec::with_capacity(k);
        for i in 0..k {
            let d = clipped[(i, i)].re;
            if d <= 1e-12 {
                return Err(Error::DecompositionDegenerate(format!(
                    "correlation diagonal entry {} vanished",
                    i + 1
                )));
            }
            scale.push(1.0 / d.sqrt());
        }
        let matrix = CMatrix::from_fn(k, k, |i, j| clipped[(i, j)] * (scale[i] * scale[j]));
        Ok(Self {
            matrix: crate::linalg::hermitian_part(&matrix),
        })
    }

    pub fn all_ones(k: usize) -> Self {
        Self {
            matrix: CMatrix::from_element(k, k, c64(1.0, 0.0)),
        }
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `C` (r x k) with `C* C = M`; its columns are unit vectors.
    pub fn factor(&self) -> CMatrix {
        let eig = herm_eig_unchecked(&self.matrix);
        let cut = 1e-14 * eig.max().max(1.0);
        let r = eig.rank_above(cut).max(1);
        CMatrix::from_fn(r, self.k(), |l, i| {
            eig.vectors[(i, l)].conj() * eig.values[l].max(0.0).sqrt()
        })
    }

    pub fn diagonal_family(&self) -> DiagonalFamily {
        let c = self.factor();
        DiagonalFamily {
            gammas: (0..c.nrows()).map(|l| c.row(l).transpose()).collect(),
        }
    }
}

/// Diagonal matrices `Γ_l` (stored as their diagonals) with `Σ_l Γ_l* Γ_l = I`
/// when built from a correlation matrix.
#[derive(Debug, Clone)]
pub struct DiagonalFamily {
    pub gammas: Vec<CVector>,
}

impl DiagonalFamily {
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn matrix(&self, l: usize) -> CMatrix {
        CMatrix::from_diagonal(&self.gammas[l])
    }

    /// `max |Σ_l |γ_l,i|^2 - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        let k = self.gammas.first().map_or(0, |g| g.len());
        (0..k)
            .map(|i| (self.gammas.iter().map(|g| g[i].norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Which family of linear constraints ties `M` to the Gram data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GramConstraint {
    /// `X* X = M ∘ Y* Y`.
    Equality,
    /// `(M ∘ Y* Y) K = 0` for a kernel basis `K` of `X* X`.
    Kernel,
}

struct Program<'a> {
    g: &'a GramPair,
    gram: GramConstraint,
    target: Option<&'a CMatrix>,
}

enum Outcome {
    Found {
        m: CorrelationMatrix,
        slack: Option<CMatrix>,
        iterations: usize,
        warnings: Vec<String>,
    },
    Decided(Certificate),
}

impl Program<'_> {
    fn k(&self) -> usize {
        self.g.k()
    }

    fn slack_dim(&self) -> usize {
        self.target.map_or(0, |b| b.nrows())
    }

    fn dim(&self) -> usize {
        herm_coords(self.k()) + herm_coords(self.slack_dim())
    }

    fn cone(&self) -> PsdProduct {
        match self.target {
            Some(b) => PsdProduct::new(vec![self.k(), b.nrows()]),
            None => PsdProduct::single(self.k()),
        }
    }

    fn split(&self, v: &RVector) -> (CMatrix, Option<CMatrix>) {
        let k = self.k();
        let m = real_to_herm(&v.as_slice()[..herm_coords(k)], k);
        let z = self
            .target
            .map(|b| real_to_herm(&v.as_slice()[herm_coords(k)..], b.nrows()));
        (m, z)
    }

    fn pack(&self, m: &CMatrix, z: Option<&CMatrix>) -> RVector {
        let mut v = RVector::zeros(self.dim());
        let hk = herm_coords(self.k());
        write_herm(m, &mut v.as_mut_slice()[..hk]);
        if let Some(z) = z {
            write_herm(z, &mut v.as_mut_slice()[hk..]);
        }
        v
    }

    /// `Y [conj(M) ∘ (X* X)^+] Y*`.
    fn target_part(&self, m: &CMatrix) -> CMatrix {
        let xp = self.g.x_pinv();
        let gxp = &xp * xp.adjoint();
        let w = hadamard(&m.map(|z| z.conj()), &gxp).expect("square");
        &self.g.y * w * self.g.y.adjoint()
    }
}

fn push_complex(out: &mut Vec<f64>, z: C64) {
    out.push(z.re);
    out.push(z.im);
}

/// Solves the correlation program, or returns a verdict directly.
fn solve_program(prog: &Program, route: &str, opts: &PureOptions) -> Outcome {
    let g = prog.g;
    let k = prog.k();
    let mut warnings = Vec::new();
    let kernel = if prog.gram == GramConstraint::Kernel {
        Some(g.kernel())
    } else {
        None
    };

    // Entries fixed by the Gram equality; (i, j, value) with i < j.
    let mut forced: Vec<(usize, usize, C64)> = Vec::new();
    if prog.gram == GramConstraint::Equality {
        for i in 0..k {
            let (dx, dy) = (g.gx[(i, i)].re, g.gy[(i, i)].re);
            if (dx - dy).abs() > opts.boundary_tol * dx.max(1.0) {
                return Outcome::Decided(Certificate::infeasible(
                    route,
                    Evidence::ConditionViolated(format!(
                        "state {} changes norm: |x|^2 = {dx:.9}, |y|^2 = {dy:.9}",
                        i + 1
                    )),
                ));
            }
            for j in (i + 1)..k {
                let gy = g.gy[(i, j)];
                let gx = g.gx[(i, j)];
                if gy.norm() <= opts.zero_tol {
                    if gx.norm() > opts.zero_tol.max(1e-9) {
                        return Outcome::Decided(Certificate::infeasible(
                            route,
                            Evidence::ConditionViolated(format!(
                                "targets {} and {} are orthogonal but the inputs overlap by {:.6e}",
                                i + 1,
                                j + 1,
                                gx.norm()
                            )),
                        ));
                    }
                } else {
                    if gy.norm() < CONDITIONING_WARN {
                        warnings.push(format!(
                            "target overlap ({}, {}) = {:.3e} makes the forced correlation ill-conditioned",
                            i + 1,
                            j + 1,
                            gy.norm()
                        ));
                    }
                    forced.push((i, j, gx / gy));
                }
            }
        }
    }

    let full_rank = prog.target.is_some() && g.rank_x() == g.in_dim();
    let constraints = |v: &RVector| {
        let (m, z) = prog.split(v);
        let mut out = Vec::new();
        for i in 0..k {
            out.push(m[(i, i)].re);
        }
        for &(i, j, _) in &forced {
            push_complex(&mut out, m[(i, j)]);
        }
        if let Some(kb) = &kernel {
            let prod = hadamard(&m, &g.gy).expect("square") * kb;
            prod.iter().for_each(|&z| push_complex(&mut out, z));
        }
        if let (Some(z), Some(_)) = (&z, prog.target) {
            let s = prog.target_part(&m) + z;
            out.extend(herm_to_real(&s).iter());
            if full_rank {
                out.extend(herm_to_real(z).iter());
            }
        }
        RVector::from_vec(out)
    };
    let mut rhs = vec![1.0; k];
    for &(_, _, q) in &forced {
        push_complex(&mut rhs, q);
    }
    if let Some(kb) = &kernel {
        rhs.extend(std::iter::repeat_n(0.0, 2 * k * kb.ncols()));
    }
    if let Some(b) = prog.target {
        rhs.extend(herm_to_real(b).iter());
        if full_rank {
            rhs.extend(std::iter::repeat_n(0.0, herm_coords(b.nrows())));
        }
    }
    let rhs = RVector::from_vec(rhs);
    let a = linear_map_matrix(prog.dim(), rhs.len(), constraints);
    let scale = rhs.norm().max(1.0);

    let decided = |mut c: Certificate, warnings: &[String]| {
        c.warnings.extend(warnings.iter().cloned());
        Outcome::Decided(c)
    };
    let found = |v: &RVector, iterations: usize| -> Outcome {
        let (m, z) = prog.split(v);
        match CorrelationMatrix::from_approximate(&m) {
            Ok(m) => Outcome::Found {
                m,
                slack: z.map(|z| herm_eig_unchecked(&z).map(|v| v.max(0.0))),
                iterations,
                warnings: Vec::new(),
            },
            Err(e) => Outcome::Decided(Certificate::indeterminate(
                route,
                Evidence::ConditionViolated(e.to_string()),
            )),
        }
    };
    let cone = prog.cone();

    // The all-ones correlation needs no search when it fits.
    let ones = CorrelationMatrix::all_ones(k);
    let slack = prog.target.map(|b| b - prog.target_part(ones.matrix()));
    let candidate = prog.pack(ones.matrix(), slack.as_ref());
    if (&a * &candidate - &rhs).norm() <= 1e-9 * scale
        && cone.min_eigenvalue(&candidate) >= -1e-9 * scale
    {
        if let found @ Outcome::Found { .. } = found(&candidate, 0) {
            return attach(found, warnings);
        }
    }

    let affine = AffineSet::least_squares(&a, &rhs);
    if affine.residual() > opts.boundary_tol * scale {
        let ev = Evidence::ConditionViolated(format!(
            "linear constraints on the correlation matrix are inconsistent (residual {:.3e})",
            affine.residual()
        ));
        let c = if affine.residual() > opts.dykstra.infeasible_gap * scale {
            Certificate::infeasible(route, ev)
        } else {
            Certificate::indeterminate(route, ev)
        };
        return decided(c, &warnings);
    }
    if affine.free_dim() == 0 {
        let point = affine.offset();
        let min = cone.min_eigenvalue(point);
        if min < -opts.boundary_tol {
            return decided(
                Certificate::infeasible(
                    route,
                    Evidence::ConditionViolated(format!(
                        "the forced correlation data has eigenvalue {min:.6e}"
                    )),
                ),
                &warnings,
            );
        }
        return attach(found(point, 0), warnings);
    }

    let run = dykstra(&affine, &cone, affine.offset(), &opts.dykstra);
    match run.status {
        DykstraStatus::Converged => attach(found(&run.cone_point, run.iterations), warnings),
        DykstraStatus::Separated => decided(
            Certificate::infeasible(
                route,
                Evidence::SeparationGap {
                    gap: run.gap,
                    iterations: run.iterations,
                },
            )
            .with_iterations(run.iterations),
            &warnings,
        ),
        DykstraStatus::IterationCap => {
            let target = opts.dykstra.feasible_tol * scale;
            if let Some(point) = polish_low_rank(&a, &rhs, &cone, &run.cone_point, target) {
                warnings.push(format!(
                    "projections stalled at gap {:.3e}; solution refined at low rank",
                    run.gap
                ));
                return attach(found(&point, run.iterations), warnings);
            }
            decided(
                Certificate::indeterminate(
                    route,
                    Evidence::Unresolved {
                        gap: run.gap,
                        iterations: run.iterations,
                    },
                )
                .with_iterations(run.iterations),
                &warnings,
            )
        }
    }
}

fn attach(outcome: Outcome, extra: Vec<String>) -> Outcome {
    match outcome {
        Outcome::Decided(mut c) => {
            c.warnings.extend(extra);
            Outcome::Decided(c)
        }
        Outcome::Found {
            m,
            slack,
            iterations,
            mut warnings,
        } => {
            warnings.extend(extra);
            Outcome::Found {
                m,
                slack,
                iterations,
                warnings,
            }
        }
    }
}

fn finish(
    route: &str,
    problem: &FeasibilityProblem,
    ch: Result<KrausChannel>,
    found: (CorrelationMatrix, usize, Vec<String>),
) -> Certificate {
    let (m, iterations, warnings) = found;
    let mut c = match ch {
        Ok(ch) => {
            let res = verify_channel(problem, &ch).expect("dimensions match");
            if res.within(crate::certificate::VERIFY_TOL) {
                Certificate::feasible(route, ch, res)
            } else {
                Certificate::indeterminate(
                    route,
                    Evidence::ConditionViolated(format!(
                        "constructed channel misses the constraints by {:.3e}",
                        res.max()
                    )),
                )
            }
        }
        Err(e) => Certificate::indeterminate(route, Evidence::ConditionViolated(e.to_string())),
    };
    c.warnings.extend(warnings);
    c.with_iterations(iterations).with_correlation(m.matrix)
}

/// Trace-preserving channel through the tensored frame `c_i ⊗ y_i`.
pub fn tpcp_channel(g: &GramPair, m: &CorrelationMatrix) -> Result<KrausChannel> {
    let c = m.factor();
    let frame: Vec<CVector> = (0..g.k())
        .map(|i| {
            let ci = c.column(i).into_owned();
            kron_vec(&ci.unscale(ci.norm()), &g.y.column(i).into_owned())
        })
        .collect();
    channel_from_frames(&g.x, &CMatrix::from_columns(&frame), g.out_dim(), 1e-6)
}

/// Kraus operators `Y Γ_l X^+`, plus operators supported on the orthogonal
/// complement of the inputs that realize `slack` as their contribution to
/// `T(I)`. With `tp` the extra operators also complete `Σ F* F` to the
/// identity.
pub fn cp_channel(
    g: &GramPair,
    m: &CorrelationMatrix,
    slack: Option<&CMatrix>,
    tp: bool,
) -> Result<KrausChannel> {
    let xp = g.x_pinv();
    let family = m.diagonal_family();
    let mut ops: Vec<CMatrix> = (0..family.len())
        .map(|l| &g.y * family.matrix(l) * &xp)
        .collect();
    if let Some(z) = slack {
        let n = g.in_dim();
        let perp = identity(n) - &g.x * &xp;
        let basis = range_basis(&perp, 1e-6);
        let q = basis.ncols();
        let eig = herm_eig_unchecked(z);
        let cut = 1e-14 * eig.max().max(1.0);
        if q == 0 {
            if eig.max() > 1e-9 {
                return Err(Error::InvalidProblem(format!(
                    "inputs span the space but T(I) needs an extra {:.3e}",
                    eig.max()
                )));
            }
        } else {
            let used = if tp { q } else { 1 };
            for l in 0..eig.values.len() {
                if eig.values[l] <= cut {
                    continue;
                }
                let w = eig.vectors.column(l).into_owned()
                    * c64((eig.values[l] / used as f64).sqrt(), 0.0);
                for s in 0..used {
                    ops.push(&w * basis.column(s).adjoint());
                }
            }
        }
    }
    ops.retain(|f| f.norm() > 1e-14);
    if ops.is_empty() {
        ops.push(CMatrix::zeros(g.out_dim(), g.in_dim()));
    }
    KrausChannel::new(g.in_dim(), g.out_dim(), ops)
}

/// Pure-to-pure TPCP interpolation: `X* X = M ∘ Y* Y` for a correlation `M`.
pub fn decide_pure_tpcp(g: &GramPair, opts: &PureOptions) -> Certificate {
    let route = "pure-tpcp";
    let prog = Program {
        g,
        gram: GramConstraint::Equality,
        target: None,
    };
    match solve_program(&prog, route, opts) {
        Outcome::Decided(c) => c,
        Outcome::Found {
            m,
            iterations,
            warnings,
            ..
        } => {
            let ch = tpcp_channel(g, &m);
            finish(
                route,
                &g.problem(MapClass::Tpcp),
                ch,
                (m, iterations, warnings),
            )
        }
    }
}

/// Pure-to-pure CP interpolation: `ker X* X ⊆ ker (M ∘ Y* Y)`.
pub fn decide_pure_cp(g: &GramPair, opts: &PureOptions) -> Certificate {
    let route = "pure-cp";
    let prog = Program {
        g,
        gram: GramConstraint::Kernel,
        target: None,
    };
    match solve_program(&prog, route, opts) {
        Outcome::Decided(c) => c,
        Outcome::Found {
            m,
            iterations,
            warnings,
            ..
        } => {
            let ch = cp_channel(g, &m, None, false);
            finish(
                route,
                &g.problem(MapClass::Cp),
                ch,
                (m, iterations, warnings),
            )
        }
    }
}

/// CP interpolation with the prescribed image `T(I) = B`.
pub fn decide_pure_cp_with_target(g: &GramPair, b: &CMatrix, opts: &PureOptions) -> Certificate {
    decide_with_target(g, b, "pure-cp-target", opts)
}

fn decide_with_target(g: &GramPair, b: &CMatrix, route: &str, opts: &PureOptions) -> Certificate {
    if b.shape() != (g.out_dim(), g.out_dim()) {
        return Certificate::indeterminate(
            route,
            Evidence::ConditionViolated(format!(
                "T(I) has shape {:?}, expected {}x{}",
                b.shape(),
                g.out_dim(),
                g.out_dim()
            )),
        );
    }
    let prog = Program {
        g,
        gram: GramConstraint::Kernel,
        target: Some(b),
    };
    let problem = g
        .problem(MapClass::Cp)
        .with_identity_image(b.clone())
        .expect("shape checked");
    match solve_program(&prog, route, opts) {
        Outcome::Decided(c) => c,
        Outcome::Found {
            m,
            slack,
            iterations,
            warnings,
        } => {
            let ch = cp_channel(g, &m, slack.as_ref(), false);
            finish(route, &problem, ch, (m, iterations, warnings))
        }
    }
}

/// Unital CP interpolation (`T(I) = I`).
pub fn decide_pure_unital_cp(g: &GramPair, opts: &PureOptions) -> Certificate {
    decide_with_target(g, &identity(g.out_dim()), "pure-ucp", opts)
}

/// Unital TPCP interpolation; requires `m = n`.
pub fn decide_pure_unital_tpcp(g: &GramPair, opts: &PureOptions) -> Certificate {
    let route = "pure-utpcp";
    if g.in_dim() != g.out_dim() {
        return Certificate::infeasible(
            route,
            Evidence::ConditionViolated(format!(
                "unital trace-preserving maps need equal dimensions, got {} -> {}",
                g.in_dim(),
                g.out_dim()
            )),
        );
    }
    let b = identity(g.out_dim());
    let prog = Program {
        g,
        gram: GramConstraint::Equality,
        target: Some(&b),
    };
    match solve_program(&prog, route, opts) {
        Outcome::Decided(c) => c,
        Outcome::Found {
            m,
            slack,
            iterations,
            warnings,
        } => {
            let ch = cp_channel(g, &m, slack.as_ref(), true);
            finish(
                route,
                &g.problem(MapClass::Utpcp),
                ch,
                (m, iterations, warnings),
            )
        }
    }
}

/// Decides `p` when all inputs and targets have rank at most one; `None`
/// when the pure procedures do not apply.
pub fn decide_pure(p: &FeasibilityProblem, opts: &PureOptions) -> Option<Certificate> {
    let g = GramPair::from_problem(p)?;
    Some(match (p.class(), p.identity_image()) {
        (MapClass::Cp, Some(b)) => decide_pure_cp_with_target(&g, b, opts),
        (MapClass::Cp, None) => decide_pure_cp(&g, opts),
        (MapClass::Tpcp, None) => decide_pure_tpcp(&g, opts),
        (MapClass::Ucp, None) => decide_pure_unital_cp(&g, opts),
        (MapClass::Utpcp, None) => decide_pure_unital_tpcp(&g, opts),
        _ => return None,
    })
}
