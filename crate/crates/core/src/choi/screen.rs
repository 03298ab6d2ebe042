//! Cheap necessary conditions checked before any iterative solve.
//!
//! A failed screen proves infeasibility; a pass proves nothing.

use crate::certificate::{ScreenKind, ScreenResult};
use crate::choi::FeasibilityProblem;
use crate::linalg::{fidelity, herm_eig_unchecked, trace_norm, CMatrix};

/// Default boundary band for screener comparisons.
pub const BOUNDARY_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct ScreenOptions {
    pub boundary_tol: f64,
    /// Extra grid points for the trace-norm condition.
    pub extra_t: Vec<f64>,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            boundary_tol: BOUNDARY_TOL,
            extra_t: Vec::new(),
        }
    }
}

/// 200 log-spaced points in `[1e-3, 1e3]`.
pub fn default_t_grid() -> Vec<f64> {
    (0..200)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0))
        .collect()
}

/// Nonnegative `t` with `det(P - t Q) = 0` for 2x2 Hermitian `P, Q`.
pub fn pencil_roots(p: &CMatrix, q: &CMatrix) -> Vec<f64> {
    if p.shape() != (2, 2) || q.shape() != (2, 2) {
        return Vec::new();
    }
    let det = |m: &CMatrix| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let d = det(p);
    let a = det(q);
    let b = (p[(0, 0)] * q[(1, 1)] + p[(1, 1)] * q[(0, 0)]
        - p[(0, 1)] * q[(1, 0)]
        - p[(1, 0)] * q[(0, 1)])
        .re;
    // a t^2 - b t + d = 0
    let mut roots = Vec::new();
    if a.abs() < 1e-14 {
        if b.abs() > 1e-14 {
            roots.push(d / b);
        }
    } else {
        let disc = b * b - 4.0 * a * d;
        if disc >= 0.0 {
            let s = disc.sqrt();
            roots.push((b - s) / (2.0 * a));
            roots.push((b + s) / (2.0 * a));
        }
    }
    roots.retain(|t| t.is_finite() && *t >= 0.0);
    roots
}

/// Worst value of `||B1 - t B2||_1 - ||A1 - t A2||_1` over a grid.
///
/// Without `grid` the default log grid plus the determinant roots of both
/// pencils is used. `extra` points are always added.
pub fn check_trace_norm_condition(
    a1: &CMatrix,
    a2: &CMatrix,
    b1: &CMatrix,
    b2: &CMatrix,
    grid: Option<&[f64]>,
    boundary_tol: f64,
) -> ScreenResult {
    let mut ts: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => {
            let mut g = default_t_grid();
            g.extend(pencil_roots(a1, a2));
            g.extend(pencil_roots(b1, b2));
            g
        }
    };
    ts.retain(|t| t.is_finite() && *t >= 0.0);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = None;
    let mut passed = true;
    for &t in &ts {
        let lhs = trace_norm(&(a1 - a2.scale(t)));
        let rhs = trace_norm(&(b1 - b2.scale(t)));
        let margin = rhs - lhs;
        if margin > worst {
            worst = margin;
            worst_t = Some(t);
        }
        if margin > boundary_tol * (1.0 + t) {
            passed = false;
        }
    }
    ScreenResult {
        kind: ScreenKind::TraceNorm,
        passed,
        margin: worst,
        pair: Some((0, 1)),
        t: worst_t,
    }
}

/// `F(B_i, B_j) >= F(A_i, A_j)` for all pairs; reports the worst pair.
pub fn fidelity_screen(inputs: &[CMatrix], targets: &[CMatrix], boundary_tol: f64) -> ScreenResult {
    let mut worst = f64::NEG_INFINITY;
    let mut pair = None;
    for i in 0..inputs.len() {
        for j in (i + 1)..inputs.len() {
            let (Ok(fa), Ok(fb)) = (
                fidelity(&inputs[i], &inputs[j]),
                fidelity(&targets[i], &targets[j]),
            ) else {
                continue;
            };
            if fa - fb > worst {
                worst = fa - fb;
                pair = Some((i, j));
            }
        }
    }
    ScreenResult {
        kind: ScreenKind::Fidelity,
        passed: worst <= boundary_tol,
        margin: if pair.is_some() { worst } else { 0.0 },
        pair,
        t: None,
    }
}

fn is_psd(a: &CMatrix) -> bool {
    let eig = herm_eig_unchecked(a);
    eig.min() >= -eig.psd_tol()
}

fn trace(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// All screens applicable to the problem's class.
///
/// Fidelity and positivity screens only run when every input is PSD, since
/// they rely on it.
pub fn screen(p: &FeasibilityProblem, opts: &ScreenOptions) -> Vec<ScreenResult> {
    let tol = opts.boundary_tol;
    let inputs = p.inputs();
    let targets = p.targets();
    let inputs_psd = inputs.iter().all(is_psd);
    let mut out = Vec::new();

    if inputs_psd {
        let mut worst = f64::NEG_INFINITY;
        let mut at = None;
        for (i, b) in targets.iter().enumerate() {
            let v = -herm_eig_unchecked(b).min();
            if v > worst {
                worst = v;
                at = Some((i, i));
            }
        }
        let scale = targets.iter().map(|b| b.norm()).fold(1.0, f64::max);
        out.push(ScreenResult {
            kind: ScreenKind::TargetPositivity,
            passed: worst <= tol * scale,
            margin: worst,
            pair: at,
            t: None,
        });
    }

    if p.class().requires_tp() {
        let mut worst = 0.0;
        let mut at = None;
        for (i, (a, b)) in inputs.iter().zip(targets).enumerate() {
            let d = (trace(a) - trace(b)).abs();
            if d > worst {
                worst = d;
                at = Some((i, i));
            }
        }
        out.push(ScreenResult {
            kind: ScreenKind::TraceConsistency,
            passed: worst <= tol,
            margin: worst,
            pair: at,
            t: None,
        });

        let mut worst: Option<ScreenResult> = None;
        for i in 0..inputs.len() {
            for j in (i + 1)..inputs.len() {
                let mut r = check_trace_norm_condition(
                    &inputs[i],
                    &inputs[j],
                    &targets[i],
                    &targets[j],
                    None,
                    tol,
                );
                if !opts.extra_t.is_empty() {
                    let extra = check_trace_norm_condition(
                        &inputs[i],
                        &inputs[j],
                        &targets[i],
                        &targets[j],
                        Some(&opts.extra_t),
                        tol,
                    );
                    if !extra.passed || extra.margin > r.margin {
                        r = ScreenResult {
                            passed: r.passed && extra.passed,
                            ..extra
                        };
                    }
                }
                r.pair = Some((i, j));
                let replace = match &worst {
                    None => true,
                    Some(w) => {
                        (w.passed && !r.passed) || (w.passed == r.passed && r.margin > w.margin)
                    }
                };
                if replace {
                    worst = Some(r);
                }
            }
        }
        if let Some(w) = worst {
            out.push(w);
        }

        if inputs_psd && targets.iter().all(is_psd) && inputs.len() > 1 {
            out.push(fidelity_screen(inputs, targets, tol));
        }
    }
    out
}

/// First failing screen, if any.
pub fn first_failure(results: &[ScreenResult]) -> Option<&ScreenResult> {
    results.iter().find(|r| !r.passed)
}
