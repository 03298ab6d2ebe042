//! Random states, unitaries, channels and interpolation instances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::choi::{FeasibilityProblem, KrausChannel, MapClass};
use crate::linalg::{c64, herm_eig_unchecked, polar_isometry, CMatrix, CVector};
use crate::states::{DensityMatrix, PureState};

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Uniformly distributed unit vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PureState {
    loop {
        let v: CVector = ginibre(rng, n, 1).column(0).into_owned();
        if v.norm() > 1e-8 {
            return PureState::normalized(v).expect("nonzero vector");
        }
    }
}

/// Density matrix `G G* / tr(G G*)` with `G` an `n x rank` Ginibre matrix.
pub fn density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, n, rank.max(1));
    let a = &g * g.adjoint();
    let tr = a.trace().re;
    DensityMatrix::new(crate::linalg::hermitian_part(&a.unscale(tr))).expect("normalized PSD")
}

/// Haar-distributed unitary (polar factor of a Ginibre matrix).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    polar_isometry(&ginibre(rng, n, n))
}

fn inverse_sqrt(s: &CMatrix) -> CMatrix {
    herm_eig_unchecked(s).map(|v| 1.0 / v.sqrt())
}

/// Random channel of the given class with `count` Kraus operators.
///
/// TPCP and unital CP channels normalize Ginibre operators by
/// `(Σ G*G)^{-1/2}` on the right or `(Σ G G*)^{-1/2}` on the left; unital
/// TPCP channels are mixtures of `count` Haar unitaries (requires `n = m`).
///
/// A TPCP channel needs at least `ceil(n / m)` operators and a unital CP one
/// at least `ceil(m / n)`; smaller counts are raised to that minimum.
pub fn channel<R: Rng + ?Sized>(
    rng: &mut R,
    class: MapClass,
    n: usize,
    m: usize,
    count: usize,
) -> KrausChannel {
    let count = match class {
        MapClass::Tpcp => count.max(n.div_ceil(m)),
        MapClass::Ucp => count.max(m.div_ceil(n)),
        _ => count,
    }
    .max(1);
    let gs: Vec<CMatrix> = (0..count).map(|_| ginibre(rng, m, n)).collect();
    let ops = match class {
        MapClass::Cp => gs
            .into_iter()
            .map(|g| g.unscale((count as f64).sqrt()))
            .collect(),
        MapClass::Tpcp => {
            let s = gs
                .iter()
                .fold(CMatrix::zeros(n, n), |acc, g| acc + g.adjoint() * g);
            let w = inverse_sqrt(&s);
            gs.into_iter().map(|g| g * &w).collect()
        }
        MapClass::Ucp => {
            let s = gs
                .iter()
                .fold(CMatrix::zeros(m, m), |acc, g| acc + g * g.adjoint());
            let w = inverse_sqrt(&s);
            gs.into_iter().map(|g| &w * g).collect()
        }
        MapClass::Utpcp => {
            assert_eq!(n, m, "unital trace-preserving channels need n = m");
            let weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights
                .iter()
                .map(|w| unitary(rng, n).scale((w / total).sqrt()))
                .collect()
        }
    };
    KrausChannel::new(n, m, ops).expect("operators have matching shapes")
}

/// Instance `T(A_i) = B_i` with random full-rank inputs and `B_i` the images
/// under a random channel of `class` with `n m` Kraus operators.
pub fn round_trip<R: Rng + ?Sized>(
    rng: &mut R,
    class: MapClass,
    n: usize,
    m: usize,
    k: usize,
) -> (FeasibilityProblem, KrausChannel) {
    let m = if class == MapClass::Utpcp { n } else { m };
    let ch = channel(rng, class, n, m, n * m);
    let inputs: Vec<CMatrix> = (0..k).map(|_| density(rng, n, n).into_matrix()).collect();
    let targets = inputs
        .iter()
        .map(|a| crate::linalg::hermitian_part(&ch.apply(a).expect("dimensions match")))
        .collect();
    let p = FeasibilityProblem::new(inputs, targets, class).expect("valid instance");
    (p, ch)
}

/// Random correlation matrix: Gram matrix of `k` uniform unit vectors in `C^dim`.
pub fn correlation<R: Rng + ?Sized>(rng: &mut R, k: usize, dim: usize) -> CMatrix {
    let z = CMatrix::from_columns(
        &(0..k)
            .map(|_| unit_vector(rng, dim.max(1)).vector().clone())
            .collect::<Vec<_>>(),
    );
    z.adjoint() * z
}

/// Pure-state instance `x_i -> y_i` with `X* X = M o Y* Y` for a random
/// correlation `M` of rank `corr_rank`, so TPCP-feasible whenever that Gram
/// matrix has rank at most `n`; otherwise `X` is its best rank-`n` factor and
/// the instance is typically infeasible.
pub fn pure_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    k: usize,
    corr_rank: usize,
) -> (Vec<CVector>, Vec<CVector>) {
    let ys: Vec<CVector> = (0..k)
        .map(|_| unit_vector(rng, m).vector().clone())
        .collect();
    let y = CMatrix::from_columns(&ys);
    let gy = y.adjoint() * &y;
    let gx = correlation(rng, k, corr_rank).component_mul(&gy);
    let eig = herm_eig_unchecked(&crate::linalg::hermitian_part(&gx));
    let mut x = CMatrix::zeros(n, k);
    for r in 0..n.min(k) {
        let s = eig.values[r].max(0.0).sqrt();
        for j in 0..k {
            x[(r, j)] = eig.vectors[(j, r)].conj() * s;
        }
    }
    let xs = (0..k).map(|j| x.column(j).into_owned()).collect();
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampled_channels_have_their_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for class in MapClass::ALL {
            for (n, m) in [(2, 3), (3, 3), (4, 2)] {
                if class == MapClass::Utpcp && n != m {
                    continue;
                }
                let ch = channel(&mut rng, class, n, m, 3);
                assert_eq!(ch.is_tp(), class.requires_tp() || ch.is_tp());
                if class.requires_tp() {
                    assert!(ch.is_tp(), "{class} {n}->{m}");
                }
                if class.requires_unital() {
                    assert!(ch.is_unital(), "{class} {n}->{m}");
                }
            }
        }
    }

    #[test]
    fn small_operator_counts_are_raised_to_the_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = channel(&mut rng, MapClass::Tpcp, 4, 2, 1);
        assert_eq!(ch.operators().len(), 2);
        assert!(ch.is_tp());
        let ch = channel(&mut rng, MapClass::Ucp, 1, 3, 1);
        assert_eq!(ch.operators().len(), 3);
        assert!(ch.is_unital());
    }

    #[test]
    fn pure_instances_match_their_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (xs, ys) = pure_instance(&mut rng, 3, 2, 3, 2);
        let x = CMatrix::from_columns(&xs);
        let y = CMatrix::from_columns(&ys);
        let gx = x.adjoint() * &x;
        let gy = y.adjoint() * &y;
        for i in 0..3 {
            assert!((gx[(i, i)].re - 1.0).abs() < 1e-12);
            assert!((gy[(i, i)].re - 1.0).abs() < 1e-12);
        }
        let m = gx.component_div(&gy);
        assert!(herm_eig_unchecked(&crate::linalg::hermitian_part(&m)).min() > -1e-10);
    }

    #[test]
    fn unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = unitary(&mut rng, 4);
        assert!((u.adjoint() * &u - crate::linalg::identity(4)).norm() < 1e-12);
    }

    #[test]
    fn densities_have_requested_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(density(&mut rng, 4, 2).rank(), 2);
        assert_eq!(density(&mut rng, 3, 3).rank(), 3);
    }
}
