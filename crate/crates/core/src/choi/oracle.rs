//! Feasibility of `T(A_i) = B_i` over Choi matrices by Dykstra projections.
//!
//! The Choi matrix is first restricted to the face of the PSD cone that any
//! solution must lie on: a CP map with `T(A) = B` for PSD `A, B` has every
//! Kraus vector orthogonal to `conj(range A) (x) ker B`. Working inside that
//! face keeps the problem strictly feasible in the common case of
//! rank-deficient targets, where plain alternating projections crawl.

use crate::certificate::{Certificate, Evidence};
use crate::choi::{choi_apply, kraus_from_choi, verify_channel, ChoiMatrix, FeasibilityProblem};
use crate::convex::{
    dykstra, herm_coords, linear_map_matrix, polish_low_rank, real_to_herm, write_herm, AffineSet,
    DykstraOptions, DykstraStatus, PsdProduct, RVector,
};
use crate::linalg::{
    herm_eig_unchecked, identity, kron, orthogonal_complement, partial_trace, range_basis, CMatrix,
    Subsystem,
};

pub const ROUTE: &str = "choi-oracle";

#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Residual below which a constructed channel counts as exact.
    pub tol: f64,
    /// Gap above which a stalled run counts as separation.
    pub infeasible_gap: f64,
    pub max_iter: usize,
    /// Iterations over which a stall is measured.
    pub window: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            infeasible_gap: 1e-5,
            max_iter: 20_000,
            window: 500,
        }
    }
}

/// Largest `c >= 0` with `a - c b` PSD, for PSD `a` and `b`; zero when the
/// range of `b` leaves the range of `a`.
fn max_psd_shift(a: &CMatrix, b: &CMatrix) -> f64 {
    let ea = herm_eig_unchecked(a);
    let ra = ea.rank_above(ea.psd_tol());
    if ra == 0 {
        return 0.0;
    }
    let basis = ea.vectors.columns(0, ra).into_owned();
    let outside = b - &basis * (basis.adjoint() * b);
    if outside.norm() > 1e-10 * b.norm().max(1e-300) {
        return 0.0;
    }
    let inv_sqrt = crate::linalg::diag(
        &ea.values[..ra]
            .iter()
            .map(|v| 1.0 / v.sqrt())
            .collect::<Vec<_>>(),
    );
    let w = &basis * inv_sqrt;
    let top = herm_eig_unchecked(&(w.adjoint() * b * &w)).max();
    if top <= 0.0 {
        0.0
    } else {
        1.0 / top
    }
}

/// Orthonormal basis of the subspace that every feasible Choi matrix is
/// supported on.
///
/// Besides the given pairs, the extreme PSD combinations `A_i - c A_j` of
/// each ordered pair are used: they are singular, so their images often have
/// kernels too.
fn feasible_face(p: &FeasibilityProblem) -> CMatrix {
    let (n, m) = (p.in_dim(), p.out_dim());
    let mut pairs: Vec<(CMatrix, CMatrix)> = p
        .inputs()
        .iter()
        .cloned()
        .zip(p.targets().iter().cloned())
        .collect();
    if let Some(b) = p.required_identity_image() {
        pairs.push((identity(n), b));
    }
    let is_psd = |h: &CMatrix| {
        let e = herm_eig_unchecked(h);
        e.min() >= -e.psd_tol()
    };
    pairs.retain(|(a, b)| is_psd(a) && is_psd(b));
    let base = pairs.len();
    for i in 0..base {
        for j in 0..base {
            if i == j {
                continue;
            }
            let c = max_psd_shift(&pairs[i].0, &pairs[j].0);
            if c > 0.0 {
                let a = &pairs[i].0 - pairs[j].0.scale(c);
                let b = &pairs[i].1 - pairs[j].1.scale(c);
                pairs.push((a, b));
            }
        }
    }

    let mut excluded: Vec<CMatrix> = Vec::new();
    for (a, b) in &pairs {
        let ea = herm_eig_unchecked(a);
        let eb = herm_eig_unchecked(b);
        let scale = ea.max().abs().max(eb.max().abs()).max(1.0);
        let tol = 1e-9 * scale;
        if eb.min() < -tol {
            continue;
        }
        let ra = ea.rank_above(tol);
        let rb = eb.rank_above(tol);
        if ra == 0 || rb == m {
            continue;
        }
        let range_a = ea.vectors.columns(0, ra).map(|z| z.conj());
        let ker_b = eb.vectors.columns(rb, m - rb).into_owned();
        excluded.push(kron(&range_a, &ker_b));
    }
    if excluded.is_empty() {
        return identity(n * m);
    }
    let cols: usize = excluded.iter().map(|e| e.ncols()).sum();
    let mut z = CMatrix::zeros(n * m, cols);
    let mut at = 0;
    for e in &excluded {
        z.columns_mut(at, e.ncols()).copy_from(e);
        at += e.ncols();
    }
    orthogonal_complement(&range_basis(&z, 1e-10))
}

/// Evaluates every linear constraint of `p` at the Choi matrix `j`.
fn constraint_values(
    p: &FeasibilityProblem,
    j: &CMatrix,
    identity_image: Option<&CMatrix>,
    out: &mut [f64],
) {
    let (n, m) = (p.in_dim(), p.out_dim());
    let mut at = 0;
    for a in p.inputs() {
        let t = choi_apply(j, n, m, a);
        write_herm(&t, &mut out[at..at + herm_coords(m)]);
        at += herm_coords(m);
    }
    if p.class().requires_tp() {
        let t = partial_trace(j, (n, m), Subsystem::Second).expect("Choi dimensions");
        write_herm(&t, &mut out[at..at + herm_coords(n)]);
        at += herm_coords(n);
    }
    if identity_image.is_some() {
        let t = partial_trace(j, (n, m), Subsystem::First).expect("Choi dimensions");
        write_herm(&t, &mut out[at..at + herm_coords(m)]);
    }
}

/// Decides the problem with the Choi-matrix oracle alone (no screeners).
pub fn decide_general(p: &FeasibilityProblem, opts: &OracleOptions) -> Certificate {
    let (n, m) = (p.in_dim(), p.out_dim());
    let identity_image = p.required_identity_image();
    let rows = p.len() * herm_coords(m)
        + if p.class().requires_tp() {
            herm_coords(n)
        } else {
            0
        }
        + if identity_image.is_some() {
            herm_coords(m)
        } else {
            0
        };
    let mut rhs = RVector::zeros(rows);
    {
        let mut at = 0;
        for b in p.targets() {
            write_herm(b, &mut rhs.as_mut_slice()[at..at + herm_coords(m)]);
            at += herm_coords(m);
        }
        if p.class().requires_tp() {
            write_herm(
                &identity(n),
                &mut rhs.as_mut_slice()[at..at + herm_coords(n)],
            );
            at += herm_coords(n);
        }
        if let Some(b) = &identity_image {
            write_herm(b, &mut rhs.as_mut_slice()[at..at + herm_coords(m)]);
        }
    }

    let face = feasible_face(p);
    let d = face.ncols();
    let lift = |x: &[f64]| -> CMatrix {
        let k = real_to_herm(x, d);
        &face * k * face.adjoint()
    };

    if d == 0 {
        // Only the zero map is left.
        let residual = rhs.norm();
        if residual <= opts.tol {
            let zero = ChoiMatrix::from_images(n, m, |_, _| CMatrix::zeros(m, m));
            return finish(p, &zero, opts, 0);
        }
        return Certificate::infeasible(
            ROUTE,
            Evidence::ConditionViolated(format!(
                "no nonzero Choi matrix fits the target supports (residual {residual:.3e})"
            )),
        );
    }

    let a = linear_map_matrix(herm_coords(d), rows, |x| {
        let j = lift(x.as_slice());
        let mut out = RVector::zeros(rows);
        constraint_values(p, &j, identity_image.as_ref(), out.as_mut_slice());
        out
    });
    let affine = AffineSet::least_squares(&a, &rhs);
    let ls = affine.residual();
    if ls > opts.tol {
        let evidence = Evidence::ConditionViolated(format!(
            "linear constraints are inconsistent (least-squares residual {ls:.3e})"
        ));
        return if ls > opts.infeasible_gap {
            Certificate::infeasible(ROUTE, evidence)
        } else {
            Certificate::indeterminate(ROUTE, evidence)
        };
    }

    let cone = PsdProduct::single(d);
    let dopts = DykstraOptions {
        max_iter: opts.max_iter,
        feasible_tol: opts.tol * 0.05,
        infeasible_gap: opts.infeasible_gap,
        window: opts.window,
        stall_rtol: 1e-3,
    };
    let run = dykstra(&affine, &cone, &RVector::zeros(herm_coords(d)), &dopts);
    match run.status {
        DykstraStatus::Converged => {
            let j = ChoiMatrix {
                in_dim: n,
                out_dim: m,
                matrix: lift(run.cone_point.as_slice()),
            };
            finish(p, &j, opts, run.iterations)
        }
        DykstraStatus::Separated => Certificate::infeasible(
            ROUTE,
            Evidence::SeparationGap {
                gap: run.gap,
                iterations: run.iterations,
            },
        )
        .with_iterations(run.iterations),
        DykstraStatus::IterationCap => {
            if let Some(polished) =
                polish_low_rank(&a, &rhs, &cone, &run.cone_point, opts.tol * 0.01)
            {
                let j = ChoiMatrix {
                    in_dim: n,
                    out_dim: m,
                    matrix: lift(polished.as_slice()),
                };
                let c = finish(p, &j, opts, run.iterations);
                if c.verdict == crate::certificate::Verdict::Feasible {
                    return c.with_warning(format!(
                        "projections stalled at gap {:.3e}; solution refined at low rank",
                        run.gap
                    ));
                }
            }
            Certificate::indeterminate(
                ROUTE,
                Evidence::Unresolved {
                    gap: run.gap,
                    iterations: run.iterations,
                },
            )
            .with_iterations(run.iterations)
        }
    }
}

fn finish(
    p: &FeasibilityProblem,
    j: &ChoiMatrix,
    opts: &OracleOptions,
    iterations: usize,
) -> Certificate {
    let channel = match kraus_from_choi(j) {
        Ok(ch) => ch,
        Err(e) => {
            return Certificate::indeterminate(ROUTE, Evidence::ConditionViolated(e.to_string()))
                .with_iterations(iterations)
        }
    };
    let residuals = verify_channel(p, &channel).expect("channel dimensions match the problem");
    if residuals.within(opts.tol) {
        Certificate::feasible(ROUTE, channel, residuals).with_iterations(iterations)
    } else {
        Certificate::indeterminate(
            ROUTE,
            Evidence::Unresolved {
                gap: residuals.max(),
                iterations,
            },
        )
        .with_iterations(iterations)
    }
}
