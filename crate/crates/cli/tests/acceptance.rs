//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Built with `harness = false` so the lines are always printed; run with
//! `cargo test -p qinterp-cli --test acceptance`.

use std::time::{Duration, Instant};

use qinterp::choi::oracle::{decide_general, OracleOptions};
use qinterp::choi::verify_channel;
use qinterp::linalg::{
    basis_vector, c64, clip_psd, diag, fidelity, from_real, herm_eig, hermitian_part, identity,
    max_abs, outer, pinv, singular_values, trace_norm, CMatrix, CVector,
};
use qinterp::mixed::{
    extract_general_certificate, extract_purification_certificate, verify_general_certificate,
    verify_purification_certificate,
};
use qinterp::pure::{
    decide_pure_cp, decide_pure_cp_with_target, decide_pure_tpcp, GramPair, PureOptions,
};
use qinterp::qubit::{decide_qubit_k4, QubitOptions, QubitProblem};
use qinterp::sample::{channel, density, ginibre, pure_instance, round_trip, unit_vector};
use qinterp::states::{reduce_qubit_pair, spectral_factor, DensityMatrix};
use qinterp::{decide, DecideOptions, Evidence, FeasibilityProblem, MapClass, Verdict};
use qinterp_cli::{cmd_decide, Flags, ProblemFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VALUE_TOL: f64 = 5e-4;
const RESIDUAL_TOL: f64 = 1e-7;
const BOUNDARY_TOL: f64 = 1e-7;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn two_qubit_example() -> FeasibilityProblem {
    let s = 3f64.sqrt() / 4.0;
    FeasibilityProblem::new(
        vec![diag(&[0.8, 0.2]), diag(&[1.0 / 3.0, 2.0 / 3.0])],
        vec![
            from_real(2, 2, &[0.25, s, s, 0.75]),
            from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]),
        ],
        MapClass::Tpcp,
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let p = two_qubit_example();
    let (a, b) = (p.inputs(), p.targets());
    let values = [
        (fidelity(&a[0], &a[1]).unwrap(), 0.8815),
        (fidelity(&b[0], &b[1]).unwrap(), 0.9659),
        (trace_norm(&(&a[0] - a[1].scale(5.0))), 4.0),
        (trace_norm(&(&b[0] - b[1].scale(5.0))), 4.1641),
    ];
    let worst = values
        .iter()
        .map(|(got, want)| (got - want).abs())
        .fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("example.json");
    std::fs::write(
        &path,
        serde_json::to_string(&ProblemFile::from_problem(&p)).unwrap(),
    )
    .unwrap();
    let report = cmd_decide(&path.to_string_lossy(), &Flags::default());
    let cert: serde_json::Value = serde_json::from_str(&report.stdout).unwrap_or_default();
    let cli_ok =
        report.code == 1 && cert["verdict"] == "INFEASIBLE" && cert["route"] == "screen-trace_norm";
    let oracle = decide_general(&p, &OracleOptions::default());
    check(
        worst <= VALUE_TOL && cli_ok && oracle.verdict == Verdict::Infeasible,
        format!(
            "F = {:.4}/{:.4}, trace norms {:.4}/{:.4} (worst error {worst:.1e}); decide exit {} route {}; oracle {}",
            values[0].0, values[1].0, values[2].0, values[3].0, report.code, cert["route"], oracle.verdict
        ),
    )
}

fn criterion_2() -> Outcome {
    let e = |i| basis_vector(2, i);
    let plus = (e(0) + e(1)).unscale(2f64.sqrt());
    let opts = PureOptions::default();
    let g = GramPair::from_states(&[e(0), plus], &[e(0), e(1)]).unwrap();
    let cp = decide_pure_cp(&g, &opts);
    let verified = cp
        .channel
        .as_ref()
        .map(|ch| {
            verify_channel(&g.problem(MapClass::Cp), ch)
                .unwrap()
                .within(RESIDUAL_TOL)
        })
        .unwrap_or(false);
    let tpcp = decide_pure_tpcp(&g, &opts);
    let g2 = GramPair::from_states(&[e(0), e(0)], &[e(0), e(0).scale(2.0)]).unwrap();
    let scaled = decide_pure_cp(&g2, &opts);
    check(
        cp.verdict == Verdict::Feasible
            && verified
            && tpcp.verdict == Verdict::Infeasible
            && scaled.verdict == Verdict::Infeasible,
        format!(
            "CP {} (map verified: {verified}), TPCP {}, repeated input with scaled target {}",
            cp.verdict, tpcp.verdict, scaled.verdict
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut total = 0;
    for class in MapClass::ALL {
        for _ in 0..500 {
            let (n, m, k) = (
                rng.random_range(1..=4),
                rng.random_range(1..=4),
                rng.random_range(1..=4),
            );
            let (p, _) = round_trip(&mut rng, class, n, m, k);
            let c = decide(&p, &DecideOptions::default());
            total += 1;
            let residual = c
                .channel
                .as_ref()
                .map(|ch| verify_channel(&p, ch).unwrap().max());
            match residual {
                Some(r) if c.verdict == Verdict::Feasible && r <= RESIDUAL_TOL => {
                    worst = worst.max(r)
                }
                _ => failures.push(format!(
                    "{class} {n}->{}, k={k}: {} via {}",
                    p.out_dim(),
                    c.verdict,
                    c.route
                )),
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{}/{total} feasible and verified, worst residual {worst:.1e}{}",
            total - failures.len(),
            failures
                .first()
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    )
}

/// Distance of a qubit pair instance to the feasibility boundary: fidelity of
/// the combined targets minus the overlap of the combined inputs, or the most
/// negative eigenvalue of a combined target.
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
    fidelity(&clip_psd(&b1), &clip_psd(&b2)).unwrap() - red.x1.vector().dotc(red.x2.vector()).norm()
}

/// Smallest eigenvalue of the correlation forced by `X*X = M o Y*Y`.
fn pure_margin(xs: &[CVector], ys: &[CVector]) -> f64 {
    let k = xs.len();
    let m = CMatrix::from_fn(k, k, |i, j| xs[i].dotc(&xs[j]) / ys[i].dotc(&ys[j]));
    herm_eig(&hermitian_part(&m)).unwrap().min()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let oracle_opts = OracleOptions::default();
    let (mut compared, mut excluded, mut feasible) = (0, 0, 0);
    let mut disagreements = Vec::new();
    for i in 0..200 {
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
        if qubit_margin(&a, &b).abs() < BOUNDARY_TOL {
            excluded += 1;
            continue;
        }
        let p = FeasibilityProblem::new(a, b, MapClass::Tpcp).unwrap();
        let fast = decide(&p, &DecideOptions::default());
        let oracle = decide_general(&p, &oracle_opts);
        compared += 1;
        feasible += (fast.verdict == Verdict::Feasible) as usize;
        if fast.verdict != oracle.verdict {
            disagreements.push(format!(
                "qubit #{i}: {} ({}) vs oracle {}",
                fast.verdict, fast.route, oracle.verdict
            ));
        }
    }
    for i in 0..200 {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let (xs, ys) = if i % 2 == 0 {
            let n = rng.random_range(k..=3);
            pure_instance(&mut rng, n, m, k, k)
        } else {
            let n = rng.random_range(1..=3);
            let xs: Vec<CVector> = (0..k)
                .map(|_| unit_vector(&mut rng, n).vector().clone())
                .collect();
            let ys: Vec<CVector> = (0..k)
                .map(|_| unit_vector(&mut rng, m).vector().clone())
                .collect();
            (xs, ys)
        };
        if pure_margin(&xs, &ys).abs() < BOUNDARY_TOL {
            excluded += 1;
            continue;
        }
        let p = FeasibilityProblem::new(
            xs.iter().map(outer).collect(),
            ys.iter().map(outer).collect(),
            MapClass::Tpcp,
        )
        .unwrap();
        let fast = decide(&p, &DecideOptions::default());
        let oracle = decide_general(&p, &oracle_opts);
        compared += 1;
        feasible += (fast.verdict == Verdict::Feasible) as usize;
        if fast.verdict != oracle.verdict {
            disagreements.push(format!(
                "pure #{i}: {} ({}) vs oracle {}",
                fast.verdict, fast.route, oracle.verdict
            ));
        }
    }
    check(
        disagreements.is_empty(),
        format!(
            "{}/{compared} agree ({feasible} feasible, {excluded} excluded in the boundary band){}",
            compared - disagreements.len(),
            disagreements
                .first()
                .map(|d| format!("; first disagreement {d}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid: Vec<f64> = (0..20)
        .map(|j| 10f64.powf(-2.0 + 4.0 * j as f64 / 19.0))
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=4);
        let x1 = unit_vector(&mut rng, n).vector().clone();
        let x2 = unit_vector(&mut rng, n).vector().clone();
        let overlap = x1.dotc(&x2).norm_sqr();
        for &t in &grid {
            let got = trace_norm(&(outer(&x1) - outer(&x2).scale(t)));
            let want = ((1.0 + t).powi(2) - 4.0 * t * overlap).max(0.0).sqrt();
            worst = worst.max((got - want).abs());
        }
    }
    check(
        worst <= 1e-9,
        format!("20000 evaluations, worst deviation {worst:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = PureOptions::default();
    let (mut tpcp_checked, mut worst_gram, mut worst_diag, mut worst_eig) =
        (0, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let k = rng.random_range(1..=4);
        let n = rng.random_range(k..=4);
        let m = rng.random_range(1..=4);
        let corr_rank = rng.random_range(1..=k);
        let (xs, ys) = pure_instance(&mut rng, n, m, k, corr_rank);
        let g = GramPair::from_states(&xs, &ys).unwrap();
        let c = decide_pure_tpcp(&g, &opts);
        if c.verdict != Verdict::Feasible {
            continue;
        }
        let Some(corr) = c.correlation.as_ref() else {
            return check(
                false,
                "feasible pure TPCP certificate without a correlation matrix",
            );
        };
        tpcp_checked += 1;
        worst_gram = worst_gram.max(max_abs(&(g.gx() - corr.component_mul(g.gy()))));
        worst_diag = worst_diag.max(
            (0..k)
                .map(|i| (corr[(i, i)] - c64(1.0, 0.0)).norm())
                .fold(0.0, f64::max),
        );
        worst_eig = worst_eig.min(herm_eig(&hermitian_part(corr)).unwrap().min());
    }

    // Prescribed T(I) = B: targets y_i = F x_i, B = F F* + G G* with G x_i = 0.
    // Adding Q, the projector off span(Y), must be rejected exactly when the
    // inputs span C^n (the image of I is then confined to span(Y)) and
    // accepted otherwise (the slack on the complement of the inputs absorbs it).
    let (mut target_checked, mut worst_b) = (0, 0.0f64);
    let (mut equality_cases, mut equality_ok, mut slack_cases, mut slack_ok) = (0, 0, 0, 0);
    for i in 0..150 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let k = if i % 2 == 0 {
            rng.random_range(n..=n + 1)
        } else {
            rng.random_range(1..=n)
        };
        let f = ginibre(&mut rng, m, n);
        let xs: Vec<CVector> = (0..k)
            .map(|_| unit_vector(&mut rng, n).vector().clone())
            .collect();
        let x = CMatrix::from_columns(&xs);
        let ys: Vec<CVector> = xs.iter().map(|v| &f * v).collect();
        let y = CMatrix::from_columns(&ys);
        let rank = singular_values(&x).iter().filter(|&&s| s > 1e-9).count();
        let proj_out = identity(n) - &x * pinv(&x);
        let gm = &ginibre(&mut rng, m, n) * &proj_out;
        let b = hermitian_part(&(&f * f.adjoint() + &gm * gm.adjoint()));
        let g = GramPair::from_states(&xs, &ys).unwrap();
        let c = decide_pure_cp_with_target(&g, &b, &opts);
        let Some(ch) = c
            .channel
            .as_ref()
            .filter(|_| c.verdict == Verdict::Feasible)
        else {
            return check(
                false,
                format!(
                    "prescribed-image instance {i} ({n}->{m}, k={k}) gave {}: {}",
                    c.verdict, c.evidence
                ),
            );
        };
        target_checked += 1;
        worst_b = worst_b.max((ch.identity_image() - &b).norm());

        let off_span = identity(m) - &y * pinv(&y);
        if off_span.norm() < 0.5 {
            continue;
        }
        let excess = &b + off_span.scale(0.1);
        let verdict = decide_pure_cp_with_target(&g, &excess, &opts).verdict;
        if rank == n {
            equality_cases += 1;
            equality_ok += (verdict == Verdict::Infeasible) as usize;
        } else {
            slack_cases += 1;
            slack_ok += (verdict == Verdict::Feasible) as usize;
        }
    }
    check(
        tpcp_checked > 0
            && worst_gram <= 1e-8
            && worst_diag <= 1e-8
            && worst_eig >= -1e-9
            && worst_b <= RESIDUAL_TOL
            && equality_cases > 0
            && equality_ok == equality_cases
            && slack_ok == slack_cases,
        format!(
            "{tpcp_checked} TPCP certificates: |X*X - M o Y*Y| {worst_gram:.1e}, |M_ii - 1| {worst_diag:.1e}, min eig(M) {worst_eig:.1e}; \
             {target_checked} prescribed-image certificates: |sum F F* - B| {worst_b:.1e}; \
             excess off span(Y) rejected in {equality_ok}/{equality_cases} full-rank (equality) cases, absorbed in {slack_ok}/{slack_cases} others"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ok, mut worst_gram) = (0, 0.0f64);
    let mut first_failure = None;
    for i in 0..100 {
        let (n, m, k) = (
            rng.random_range(2..=4),
            rng.random_range(2..=4),
            rng.random_range(1..=4),
        );
        let count = rng.random_range(1..=4);
        let ch = channel(&mut rng, MapClass::Tpcp, n, m, count);

        let xs: Vec<CVector> = (0..k)
            .map(|_| unit_vector(&mut rng, n).vector().clone())
            .collect();
        let x = CMatrix::from_columns(&xs);
        let pure_targets: Vec<CMatrix> = xs
            .iter()
            .map(|v| hermitian_part(&ch.apply(&outer(v)).unwrap()))
            .collect();
        let purification = extract_purification_certificate(&ch, &x)
            .and_then(|cert| verify_purification_certificate(&x, &pure_targets, &cert));

        let inputs: Vec<CMatrix> = (0..k)
            .map(|_| {
                let rank = rng.random_range(1..=n);
                density(&mut rng, n, rank).into_matrix()
            })
            .collect();
        let a: Vec<_> = inputs.iter().map(|v| spectral_factor(v).unwrap()).collect();
        let b: Vec<_> = inputs
            .iter()
            .map(|v| spectral_factor(&hermitian_part(&ch.apply(v).unwrap())).unwrap())
            .collect();
        let general = extract_general_certificate(&ch, &a, &b)
            .and_then(|cert| verify_general_certificate(&a, &b, &cert));

        match (purification, general) {
            (Ok(p), Ok(g))
                if p.valid
                    && g.valid
                    && p.gram_residual <= RESIDUAL_TOL
                    && g.gram_residual <= RESIDUAL_TOL =>
            {
                ok += 1;
                worst_gram = worst_gram.max(p.gram_residual).max(g.gram_residual);
            }
            other => {
                first_failure.get_or_insert(format!("channel {i} ({n}->{m}, k={k}): {other:?}"));
            }
        }
    }
    check(
        ok == 100,
        format!(
            "{ok}/100 channels round-trip both certificates, worst Gram residual {worst_gram:.1e}{}",
            first_failure.map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_8() -> Outcome {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let vectors = [
        basis_vector(2, 0),
        basis_vector(2, 1),
        CVector::from_vec(vec![c64(s, 0.0), c64(s, 0.0)]),
        CVector::from_vec(vec![c64(s, 0.0), c64(0.0, s)]),
    ];
    let inputs: Vec<DensityMatrix> = vectors
        .iter()
        .map(|v| DensityMatrix::new(outer(v)).unwrap())
        .collect();
    let targets: Vec<DensityMatrix> = inputs
        .iter()
        .map(|d| DensityMatrix::new(d.matrix().transpose()).unwrap())
        .collect();
    let q = QubitProblem::new(inputs, targets).unwrap();
    let c = decide_qubit_k4(&q, &QubitOptions::default());
    match c.evidence {
        Evidence::NegativeChoiEigenvalue(v) if c.verdict == Verdict::Infeasible && v < 0.0 => {
            check(true, format!("INFEASIBLE, Choi eigenvalue {v:.4}"))
        }
        other => check(false, format!("{} with {other}", c.verdict)),
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            1,
            "two-qubit counterexample",
            Duration::from_secs(1),
            criterion_1,
        ),
        (
            2,
            "pure-state counterexamples",
            Duration::from_secs(1),
            criterion_2,
        ),
        (
            3,
            "round-trip soundness",
            Duration::from_secs(120),
            criterion_3,
        ),
        (
            4,
            "fast-path/oracle agreement",
            Duration::from_secs(300),
            criterion_4,
        ),
        (
            5,
            "two-projector trace norm identity",
            Duration::MAX,
            criterion_5,
        ),
        (6, "certificate equalities", Duration::MAX, criterion_6),
        (
            7,
            "mixed-state certificate round trips",
            Duration::MAX,
            criterion_7,
        ),
        (
            8,
            "transpose map negative control",
            Duration::MAX,
            criterion_8,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = outcome.passed && in_time;
        failed += (!passed) as usize;
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / limit {:.0?}", budget)
        };
        println!(
            "criterion {id} [{}] {name}: {} ({:.3?}{budget_note}{})",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed,
            if in_time { "" } else { ", over time limit" }
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
