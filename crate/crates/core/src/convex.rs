//! Projections onto convex sets and Dykstra's algorithm.
//!
//! Hermitian matrices are handled through real coordinates that are
//! orthonormal for the Frobenius inner product: the diagonal entries first,
//! then `sqrt(2) Re h_ij, sqrt(2) Im h_ij` for `i < j` in row-major order.
//! Euclidean projections in coordinate space are then Frobenius projections
//! of the matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{c64, herm_eig_unchecked, CMatrix};

pub type RVector = DVector<f64>;
pub type RMatrix = DMatrix<f64>;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Number of real coordinates of an `n x n` Hermitian matrix.
pub fn herm_coords(n: usize) -> usize {
    n * n
}

pub fn herm_to_real(h: &CMatrix) -> RVector {
    let n = h.nrows();
    let mut out = RVector::zeros(n * n);
    write_herm(h, out.as_mut_slice());
    out
}

pub fn write_herm(h: &CMatrix, out: &mut [f64]) {
    let n = h.nrows();
    for i in 0..n {
        out[i] = h[(i, i)].re;
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            out[k] = SQRT2 * z.re;
            out[k + 1] = SQRT2 * z.im;
            k += 2;
        }
    }
}

pub fn real_to_herm(v: &[f64], n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = c64(v[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = c64(v[k] / SQRT2, v[k + 1] / SQRT2);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Matrix of a real-linear map given by evaluating it on the standard basis.
pub fn linear_map_matrix(
    in_dim: usize,
    out_dim: usize,
    mut f: impl FnMut(&RVector) -> RVector,
) -> RMatrix {
    let mut a = RMatrix::zeros(out_dim, in_dim);
    let mut e = RVector::zeros(in_dim);
    for j in 0..in_dim {
        e[j] = 1.0;
        let col = f(&e);
        debug_assert_eq!(col.len(), out_dim);
        a.set_column(j, &col);
        e[j] = 0.0;
    }
    a
}

/// Affine set `{x : A x = b}` with a precomputed projector.
#[derive(Debug, Clone)]
pub struct AffineSet {
    /// Orthonormal basis of the row space of `A` (`dim x rank`).
    row_space: RMatrix,
    /// Minimum-norm solution of `A x = b`.
    offset: RVector,
    /// Least-squares residual `||A x_min - b||`.
    residual: f64,
}

impl AffineSet {
    /// Builds the set, rejecting systems whose least-squares residual exceeds
    /// `consistency_tol * max(1, ||b||)`.
    pub fn new(a: &RMatrix, b: &RVector, consistency_tol: f64) -> Result<Self> {
        let set = Self::least_squares(a, b);
        if set.residual > consistency_tol * b.norm().max(1.0) {
            return Err(Error::Inconsistent(set.residual));
        }
        Ok(set)
    }

    /// Builds the set without a consistency check; `offset` is the
    /// minimum-norm least-squares solution.
    pub fn least_squares(a: &RMatrix, b: &RVector) -> Self {
        let dim = a.ncols();
        if a.nrows() == 0 || dim == 0 {
            return Self {
                row_space: RMatrix::zeros(dim, 0),
                offset: RVector::zeros(dim),
                residual: b.norm(),
            };
        }
        let (u, s, v) = crate::linalg::dense::real_svd(a);
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let cutoff = 1e-10 * smax.max(f64::MIN_POSITIVE);
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff).collect();
        let mut row_space = RMatrix::zeros(dim, keep.len());
        let mut offset = RVector::zeros(dim);
        for (c, &i) in keep.iter().enumerate() {
            let vi = v.column(i).into_owned();
            row_space.set_column(c, &vi);
            let coeff = u.column(i).dot(b) / s[i];
            offset += vi * coeff;
        }
        let residual = (a * &offset - b).norm();
        Self {
            row_space,
            offset,
            residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Dimension of the affine set itself.
    pub fn free_dim(&self) -> usize {
        self.dim() - self.row_space.ncols()
    }

    pub fn offset(&self) -> &RVector {
        &self.offset
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Orthonormal basis of the direction space (`dim x free_dim`).
    pub fn null_space(&self) -> RMatrix {
        let dim = self.dim();
        let r = self.row_space.ncols();
        if r == 0 {
            return RMatrix::identity(dim, dim);
        }
        let proj = RMatrix::identity(dim, dim) - &self.row_space * self.row_space.transpose();
        let (values, vectors) = crate::linalg::dense::real_sym_eig(&proj);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
        let mut out = RMatrix::zeros(dim, dim - r);
        for (c, &j) in order.iter().take(dim - r).enumerate() {
            out.set_column(c, &vectors.column(j));
        }
        out
    }

    pub fn project(&self, x: &RVector) -> RVector {
        let coeff = self.row_space.tr_mul(x);
        x - &self.row_space * coeff + &self.offset
    }
}

/// A closed convex set with an exact Euclidean projection.
pub trait ConvexSet {
    fn project(&self, x: &RVector) -> RVector;
}

/// Product of PSD cones, each stored in Hermitian coordinates, laid out
/// consecutively in the vector.
#[derive(Debug, Clone)]
pub struct PsdProduct {
    blocks: Vec<usize>,
}

impl PsdProduct {
    pub fn new(blocks: Vec<usize>) -> Self {
        Self { blocks }
    }

    pub fn single(n: usize) -> Self {
        Self { blocks: vec![n] }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|&n| herm_coords(n)).sum()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Splits a coordinate vector into its Hermitian blocks.
    pub fn unpack(&self, x: &RVector) -> Vec<CMatrix> {
        let mut at = 0;
        self.blocks
            .iter()
            .map(|&n| {
                let len = herm_coords(n);
                let h = real_to_herm(&x.as_slice()[at..at + len], n);
                at += len;
                h
            })
            .collect()
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self, x: &RVector) -> f64 {
        self.unpack(x)
            .iter()
            .map(|h| herm_eig_unchecked(h).min())
            .fold(f64::INFINITY, f64::min)
    }
}

impl ConvexSet for PsdProduct {
    fn project(&self, x: &RVector) -> RVector {
        let mut out = RVector::zeros(x.len());
        let mut at = 0;
        for &n in &self.blocks {
            let len = herm_coords(n);
            let h = real_to_herm(&x.as_slice()[at..at + len], n);
            let clipped = herm_eig_unchecked(&h).map(|v| v.max(0.0));
            write_herm(&clipped, &mut out.as_mut_slice()[at..at + len]);
            at += len;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DykstraOptions {
    pub max_iter: usize,
    /// Declare convergence once the affine/cone gap drops below this.
    pub feasible_tol: f64,
    /// Gaps above this that have stopped shrinking signal separation.
    pub infeasible_gap: f64,
    /// Number of iterations over which stagnation is measured.
    pub window: usize,
    /// Relative decrease of the gap over `window` iterations below which the
    /// gap counts as stabilized.
    pub stall_rtol: f64,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            feasible_tol: 1e-7,
            infeasible_gap: 1e-5,
            window: 500,
            stall_rtol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DykstraStatus {
    /// Gap fell below `feasible_tol`.
    Converged,
    /// Gap stabilized above `infeasible_gap`.
    Separated,
    /// Iteration cap reached without either condition.
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct DykstraRun {
    pub affine_point: RVector,
    pub cone_point: RVector,
    pub gap: f64,
    pub iterations: usize,
    pub status: DykstraStatus,
}

/// Dykstra's algorithm for the intersection of an affine set and a convex set.
///
/// The affine set needs no correction term, so only the convex set carries one.
/// The returned pair are the last iterates in each set.
pub fn dykstra(
    affine: &AffineSet,
    cone: &impl ConvexSet,
    start: &RVector,
    opts: &DykstraOptions,
) -> DykstraRun {
    let mut x = affine.project(start);
    let mut correction = RVector::zeros(x.len());
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iter.min(4096));
    let mut last_cone = x.clone();
    let mut gap = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let shifted = &x + &correction;
        let y = cone.project(&shifted);
        correction = shifted - &y;
        x = affine.project(&y);
        gap = (&x - &y).norm();
        last_cone = y;
        history.push(gap);
        if gap < opts.feasible_tol {
            return DykstraRun {
                affine_point: x,
                cone_point: last_cone,
                gap,
                iterations: it,
                status: DykstraStatus::Converged,
            };
        }
        if it > opts.window && gap > opts.infeasible_gap {
            let earlier = history[it - 1 - opts.window];
            if earlier - gap <= opts.stall_rtol * gap {
                return DykstraRun {
                    affine_point: x,
                    cone_point: last_cone,
                    gap,
                    iterations: it,
                    status: DykstraStatus::Separated,
                };
            }
        }
    }
    DykstraRun {
        affine_point: x,
        cone_point: last_cone,
        gap,
        iterations: opts.max_iter,
        status: DykstraStatus::IterationCap,
    }
}

/// Refines `start`, a cone point close to `{x : a x = b}` whose blocks are
/// nearly low rank, until `||a x - b|| <= target`.
///
/// Dykstra converges sublinearly when the intersection only touches the
/// boundary of the cone. Writing each block as `V V*` keeps iterates in the
/// cone, and Levenberg-Marquardt on `V` converges fast from a close start.
/// Ranks nearest the numerical ranks of `start` are tried first.
pub fn polish_low_rank(
    a: &RMatrix,
    b: &RVector,
    cone: &PsdProduct,
    start: &RVector,
    target: f64,
) -> Option<RVector> {
    let eigs: Vec<_> = cone.unpack(start).iter().map(herm_eig_unchecked).collect();
    let guesses: Vec<usize> = eigs
        .iter()
        .map(|e| {
            if e.max() > 0.0 {
                e.rank_above(1e-4 * e.max())
            } else {
                0
            }
        })
        .collect();
    let mut tried: Vec<Vec<usize>> = Vec::new();
    for delta in [0i64, 1, -1, 2, -2, 3, -3] {
        let ranks: Vec<usize> = guesses
            .iter()
            .zip(cone.blocks())
            .map(|(&g, &n)| (g as i64 + delta).clamp(0, n as i64) as usize)
            .collect();
        if ranks.iter().all(|&r| r == 0) || tried.contains(&ranks) {
            continue;
        }
        tried.push(ranks.clone());
        let mut factors: Vec<CMatrix> = eigs
            .iter()
            .zip(&ranks)
            .map(|(e, &r)| {
                let n = e.values.len();
                CMatrix::from_fn(n, r, |i, j| e.vectors[(i, j)] * e.values[j].max(0.0).sqrt())
            })
            .collect();
        if levenberg_marquardt(a, b, cone, &mut factors, target) {
            return Some(pack_factors(cone, &factors));
        }
    }
    None
}

fn pack_factors(cone: &PsdProduct, factors: &[CMatrix]) -> RVector {
    let mut x = RVector::zeros(cone.dim());
    let mut at = 0;
    for v in factors {
        let len = herm_coords(v.nrows());
        write_herm(&(v * v.adjoint()), &mut x.as_mut_slice()[at..at + len]);
        at += len;
    }
    x
}

fn levenberg_marquardt(
    a: &RMatrix,
    b: &RVector,
    cone: &PsdProduct,
    factors: &mut [CMatrix],
    target: f64,
) -> bool {
    let params: usize = factors.iter().map(|v| 2 * v.len()).sum();
    let residual = |f: &[CMatrix]| a * pack_factors(cone, f) - b;
    let mut res = residual(factors);
    let mut lambda = 1e-6;
    let mut checkpoint = res.norm();
    for iter in 0..200 {
        if res.norm() <= target {
            return true;
        }
        if iter > 0 && iter % 10 == 0 {
            if res.norm() > 0.5 * checkpoint {
                return false;
            }
            checkpoint = res.norm();
        }
        let mut jac = RMatrix::zeros(a.nrows(), params);
        let (mut col, mut at) = (0, 0);
        for v in factors.iter() {
            let (n, r) = v.shape();
            let len = herm_coords(n);
            let a_block = a.columns(at, len);
            for p in 0..2 * n * r {
                let (entry, imag) = (p / 2, p % 2 == 1);
                let mut dv = CMatrix::zeros(n, r);
                dv[(entry % n, entry / n)] = if imag { c64(0.0, 1.0) } else { c64(1.0, 0.0) };
                let dk = &dv * v.adjoint() + v * dv.adjoint();
                jac.set_column(col, &(a_block * herm_to_real(&dk)));
                col += 1;
            }
            at += len;
        }
        let jt = jac.transpose();
        let grad = &jt * &res;
        let normal = &jt * &jac;
        let mut improved = false;
        for _ in 0..20 {
            let mut lhs = normal.clone();
            for i in 0..params {
                lhs[(i, i)] += lambda * (1.0 + normal[(i, i)]);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = factors.to_vec();
            let mut p = 0;
            for v in trial.iter_mut() {
                let n = v.nrows();
                for j in 0..v.ncols() {
                    for i in 0..n {
                        v[(i, j)] += c64(step[p], step[p + 1]);
                        p += 2;
                    }
                }
            }
            let trial_res = residual(&trial);
            if trial_res.norm() < res.norm() {
                factors.clone_from_slice(&trial);
                res = trial_res;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return false;
        }
    }
    res.norm() <= target
}
