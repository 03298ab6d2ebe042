//! Fast paths against the Choi oracle, away from the feasibility boundary.
//!
//! The distance to the boundary is computed here from first principles: for
//! two qubit states it is the fidelity of the reduced targets minus the
//! overlap of the reduced inputs, and for pure TPCP instances it is the
//! smallest eigenvalue of the entrywise quotient of the Gram matrices.

use qinterp::choi::oracle::{decide_general, OracleOptions};
use qinterp::linalg::{clip_psd, fidelity, herm_eig, hermitian_part, outer, CMatrix};
use qinterp::sample::{channel, density, pure_instance};
use qinterp::states::{reduce_qubit_pair, DensityMatrix};
use qinterp::{decide, DecideOptions, FeasibilityProblem, MapClass, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BAND: f64 = 1e-7;

fn qubit_margin(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    let da = |m: &CMatrix| DensityMatrix::new(m.clone()).unwrap();
    let red = reduce_qubit_pair(&da(&a[0]), &da(&a[1])).unwrap();
    let (b1, b2) = red.apply(&b[0], &b[1]);
    let neg = herm_eig(&hermitian_part(&b1))
        .unwrap()
        .min()
        .min(herm_eig(&hermitian_part(&b2)).unwrap().min());
    if neg < 0.0 {
        return neg;
    }
    let overlap = red.x1.vector().dotc(red.x2.vector()).norm();
    fidelity(&clip_psd(&b1), &clip_psd(&b2)).unwrap() - overlap
}

#[test]
fn qubit_pairs_agree_with_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let (mut compared, mut feasible) = (0, 0);
    for i in 0..60 {
        let a: Vec<CMatrix> = (0..2)
            .map(|_| density(&mut rng, 2, 2).into_matrix())
            .collect();
        let b: Vec<CMatrix> = if i % 2 == 0 {
            let count = rng.random_range(1..=4);
            let ch = channel(&mut rng, MapClass::Tpcp, 2, 2, count);
            a.iter()
                .map(|x| hermitian_part(&ch.apply(x).unwrap()))
                .collect()
        } else {
            (0..2)
                .map(|_| {
                    let rank = rng.random_range(1..=2);
                    density(&mut rng, 2, rank).into_matrix()
                })
                .collect()
        };
        if qubit_margin(&a, &b).abs() < BAND {
            continue;
        }
        let p = FeasibilityProblem::new(a, b, MapClass::Tpcp).unwrap();
        let fast = decide(&p, &DecideOptions::default());
        let oracle = decide_general(&p, &OracleOptions::default());
        assert!(
            fast.route == "qubit-k2" || fast.route.starts_with("screen-"),
            "{}",
            fast.route
        );
        assert_eq!(
            fast.verdict, oracle.verdict,
            "{} vs {}",
            fast.evidence, oracle.evidence
        );
        compared += 1;
        feasible += (fast.verdict == Verdict::Feasible) as usize;
    }
    assert!(compared >= 50 && feasible >= 20 && compared - feasible >= 10);
}

fn pure_margin(xs: &[qinterp::linalg::CVector], ys: &[qinterp::linalg::CVector]) -> f64 {
    let k = xs.len();
    let m = CMatrix::from_fn(k, k, |i, j| xs[i].dotc(&xs[j]) / ys[i].dotc(&ys[j]));
    herm_eig(&hermitian_part(&m)).unwrap().min()
}

#[test]
fn pure_instances_agree_with_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut compared, mut feasible) = (0, 0);
    for i in 0..60 {
        let k = rng.random_range(2..=3);
        let n = rng.random_range(k..=3);
        let m = rng.random_range(2..=3);
        let (xs, ys) = if i % 2 == 0 {
            pure_instance(&mut rng, n, m, k, k)
        } else {
            let xs = (0..k)
                .map(|_| qinterp::sample::unit_vector(&mut rng, n).vector().clone())
                .collect();
            let ys = (0..k)
                .map(|_| qinterp::sample::unit_vector(&mut rng, m).vector().clone())
                .collect();
            (xs, ys)
        };
        if pure_margin(&xs, &ys).abs() < BAND {
            continue;
        }
        let p = FeasibilityProblem::new(
            xs.iter().map(outer).collect(),
            ys.iter().map(outer).collect(),
            MapClass::Tpcp,
        )
        .unwrap();
        let fast = decide(&p, &DecideOptions::default());
        let oracle = decide_general(&p, &OracleOptions::default());
        assert_eq!(
            fast.verdict, oracle.verdict,
            "{}: {} vs {}",
            fast.route, fast.evidence, oracle.evidence
        );
        compared += 1;
        feasible += (fast.verdict == Verdict::Feasible) as usize;
    }
    assert!(
        compared >= 50 && feasible >= 10 && compared - feasible >= 10,
        "{compared} {feasible}"
    );
}
