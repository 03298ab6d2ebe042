use proptest::prelude::*;
use qinterp::choi::screen::check_trace_norm_condition;
use qinterp::choi::{choi_from_kraus, kraus_from_choi};
use qinterp::convex::{herm_to_real, real_to_herm};
use qinterp::linalg::{fidelity, herm_eig, hermitian_part, max_abs, outer, trace_norm};
use qinterp::pure::{decide_pure_tpcp, GramPair, PureOptions};
use qinterp::sample::{channel, density, ginibre, pure_instance, unit_vector};
use qinterp::{decide, DecideOptions, FeasibilityProblem, MapClass, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_norm_of_two_projector_difference(seed: u64, n in 1usize..5, t in 0.0f64..10.0) {
        let mut r = rng(seed);
        let x1 = unit_vector(&mut r, n).vector().clone();
        let x2 = unit_vector(&mut r, n).vector().clone();
        let lhs = trace_norm(&(outer(&x1) - outer(&x2).scale(t)));
        let overlap = x1.dotc(&x2).norm_sqr();
        let rhs = ((1.0 + t).powi(2) - 4.0 * t * overlap).max(0.0).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + t));
    }

    #[test]
    fn hermitian_coordinates_are_isometric(seed: u64, n in 1usize..6) {
        let mut r = rng(seed);
        let h = hermitian_part(&ginibre(&mut r, n, n));
        let v = herm_to_real(&h);
        prop_assert!((v.norm() - h.norm()).abs() < 1e-12 * (1.0 + h.norm()));
        prop_assert!((real_to_herm(v.as_slice(), n) - &h).norm() < 1e-12);
    }

    #[test]
    fn choi_and_kraus_forms_act_alike(seed: u64, n in 1usize..4, m in 1usize..4, count in 1usize..5) {
        let mut r = rng(seed);
        let ch = channel(&mut r, MapClass::Cp, n, m, count);
        let back = kraus_from_choi(&choi_from_kraus(&ch)).unwrap();
        prop_assert!(back.len() <= n * m);
        let x = ginibre(&mut r, n, n);
        prop_assert!((ch.apply(&x).unwrap() - back.apply(&x).unwrap()).norm() < 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn channels_shrink_distinguishability(seed: u64, n in 1usize..4, m in 1usize..4, count in 1usize..4) {
        let mut r = rng(seed);
        let ch = channel(&mut r, MapClass::Tpcp, n, m, count);
        let a1 = density(&mut r, n, n).into_matrix();
        let a2 = density(&mut r, n, 1).into_matrix();
        let b1 = hermitian_part(&ch.apply(&a1).unwrap());
        let b2 = hermitian_part(&ch.apply(&a2).unwrap());
        prop_assert!(fidelity(&b1, &b2).unwrap() >= fidelity(&a1, &a2).unwrap() - 1e-7);
        let s = check_trace_norm_condition(&a1, &a2, &b1, &b2, None, 1e-7);
        prop_assert!(s.passed, "{}", s);
    }

    #[test]
    fn channel_images_are_never_rejected(seed: u64, n in 1usize..4, m in 1usize..4, k in 1usize..4) {
        let mut r = rng(seed);
        let (p, _) = qinterp::sample::round_trip(&mut r, MapClass::Tpcp, n, m, k);
        let c = decide(&p, &DecideOptions::default());
        prop_assert_eq!(c.verdict, Verdict::Feasible, "{}", c.evidence);
    }

    #[test]
    fn pure_certificates_carry_a_valid_correlation(seed: u64, k in 2usize..4, m in 2usize..4) {
        let mut r = rng(seed);
        let (xs, ys) = pure_instance(&mut r, k, m, k, k);
        let g = GramPair::from_states(&xs, &ys).unwrap();
        let c = decide_pure_tpcp(&g, &PureOptions::default());
        prop_assert_eq!(c.verdict, Verdict::Feasible, "{}", c.evidence);
        let corr = c.correlation.clone().expect("correlation witness");
        let gap = max_abs(&(g.gx() - corr.component_mul(g.gy())));
        prop_assert!(gap <= 1e-8, "{}", gap);
        prop_assert!(herm_eig(&hermitian_part(&corr)).unwrap().min() >= -1e-9);
        for i in 0..k {
            prop_assert!((corr[(i, i)].re - 1.0).abs() <= 1e-9);
        }
        let p = FeasibilityProblem::new(
            xs.iter().map(outer).collect(),
            ys.iter().map(outer).collect(),
            MapClass::Tpcp,
        )
        .unwrap();
        let res = qinterp::choi::verify_channel(&p, c.channel.as_ref().unwrap()).unwrap();
        prop_assert!(res.within(1e-7), "{:?}", res);
    }
}
