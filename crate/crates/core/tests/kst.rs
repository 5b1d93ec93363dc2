use proptest::prelude::*;

use splinekit::functions::{benchmark_function, BENCHMARK};
use splinekit::kst::{
    benchmark_suite, build_inner_functions, dls_fit, k_polynomial, kb_eval, lkb_build, BenchmarkConfig,
    InnerFunctions, KBBasis, KstError, LKBBasis, DEFAULT_LAMBDA, NQ,
};
use splinekit::lsq::LsqConfig;
use splinekit::mesh::Point2;

/// Cox-de Boor recursion, `0/0 = 0`, with the last span closed on the right.
fn cox_de_boor(knots: &[f64], i: usize, k: usize, t: f64) -> f64 {
    if k == 0 {
        let last = knots[knots.len() - 1];
        let hit = knots[i] <= t && (t < knots[i + 1] || (t == last && knots[i + 1] == last && knots[i] < last));
        return if hit { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + k] - knots[i];
    if d1 > 0.0 {
        v += (t - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, t);
    }
    let d2 = knots[i + k + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + k + 1] - t) / d2 * cox_de_boor(knots, i + 1, k - 1, t);
    }
    v
}

fn unit_point() -> impl Strategy<Value = Point2> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

#[test]
fn coarse_psi_agrees_with_fine_psi_on_coarse_grid() {
    for r in 3..7 {
        let coarse = InnerFunctions::new(r, DEFAULT_LAMBDA).unwrap();
        let fine = InnerFunctions::new(r + 1, DEFAULT_LAMBDA).unwrap();
        let top = 6u64.pow(r as u32);
        for j in 0..=top {
            let x = j as f64 / top as f64;
            let diff = (coarse.psi(x) - fine.psi(x)).abs();
            assert!(diff < 1e-12, "r={r} j={j}: {diff:e}");
        }
    }
}

#[test]
fn phi_is_increasing_with_values_in_unit_interval() {
    let inner = build_inner_functions(5).unwrap();
    for q in 0..NQ {
        let (knots, vals) = inner.table(q);
        assert_eq!(knots.len(), vals.len());
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for w in vals.windows(2) {
            assert!(w[1] > w[0], "q={q}");
        }
    }
    // the last shift reaches exactly 1 at x = 1
    assert!((inner.phi(NQ - 1, 1.0) - 1.0).abs() < 1e-15);
}

#[test]
fn unit_step_psi_is_the_identity_on_the_grid() {
    // with step 1 digit k keeps its base-6 weight 6^-k
    let inner = InnerFunctions::with_step(4, DEFAULT_LAMBDA, 1.0).unwrap();
    for j in 0..=1296 {
        let x = j as f64 / 1296.0;
        assert!((inner.psi(x) - x).abs() < 1e-14);
    }
}

#[test]
fn bsplines_match_cox_de_boor() {
    let inner = build_inner_functions(4).unwrap();
    for (n, k) in [(3, 2), (5, 3), (10, 3), (8, 5)] {
        let kb = KBBasis::new(inner.clone(), n, k).unwrap();
        for s in 0..=200 {
            let t = 2.0 * s as f64 / 200.0;
            let got = kb.bspline_all(t);
            for (i, g) in got.iter().enumerate() {
                let want = cox_de_boor(&kb.knots, i, k, t);
                assert!((g - want).abs() < 1e-13, "n={n} k={k} t={t} i={i}: {g} vs {want}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kb_functions_sum_to_the_number_of_shifts(x in unit_point(), n in 2usize..12, k in 1usize..4) {
        let kb = KBBasis::new(build_inner_functions(6).unwrap(), n, k).unwrap();
        let v = kb.eval_all(x);
        prop_assert!(v.iter().all(|&b| b >= -1e-15));
        prop_assert!((v.iter().sum::<f64>() - NQ as f64).abs() < 1e-12);
    }

    #[test]
    fn k_polynomial_is_sum_of_powered_inner_sums(x in unit_point(), n in 0u32..6) {
        let inner = build_inner_functions(6).unwrap();
        let want: f64 = (0..NQ)
            .map(|q| (DEFAULT_LAMBDA[0] * inner.phi(q, x.x) + DEFAULT_LAMBDA[1] * inner.phi(q, x.y)).powi(n as i32))
            .sum();
        prop_assert!((k_polynomial(&inner, n, x).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn lkb_basis_round_trips_through_a_directory() {
    let kb = KBBasis::new(build_inner_functions(5).unwrap(), 3, 3).unwrap();
    let lkb = lkb_build(&kb, 21, 1.0, &LsqConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    lkb.save(dir.path()).unwrap();
    let back = LKBBasis::load(dir.path()).unwrap();
    assert_eq!(back.len(), lkb.len());
    assert_eq!(back.coeffs, lkb.coeffs);
    assert_eq!((back.grid_n, back.lambda), (lkb.grid_n, lkb.lambda));
    assert_eq!((back.kb.n, back.kb.k, back.kb.inner.resolution), (3, 3, 5));
    let p = Point2::new(0.3, 0.7);
    assert_eq!(back.kb.eval_all(p), lkb.kb.eval_all(p));

    assert!(matches!(
        LKBBasis::load(&dir.path().join("missing")),
        Err(KstError::Io(_) | KstError::Basis(_))
    ));
}

#[test]
fn constants_are_in_the_span_of_the_smoothed_basis() {
    // the KB functions sum to 5 and smoothing keeps constants
    let kb = KBBasis::new(build_inner_functions(5).unwrap(), 3, 3).unwrap();
    let lkb = lkb_build(&kb, 31, 1.0, &LsqConfig::default()).unwrap();
    let fit = dls_fit(&lkb, benchmark_function("one").unwrap().f, 31, 51);
    assert!(fit.rmse_train < 1e-9, "{}", fit.rmse_train);
    assert!(fit.rmse_test < 1e-9, "{}", fit.rmse_test);
}

#[test]
fn benchmark_table_has_one_row_per_function() {
    let cfg = BenchmarkConfig {
        resolution: 4,
        train_n: 21,
        test_n: 31,
        ..BenchmarkConfig::default()
    };
    let table = benchmark_suite(&BENCHMARK, &[2, 4], &cfg, &LsqConfig::default()).unwrap();
    assert_eq!(table.rows.len(), 10);
    for (name, errs) in &table.rows {
        assert_eq!(errs.len(), 2, "{name}");
        assert!(errs.iter().all(|e| e.is_finite() && *e >= 0.0));
    }
    let csv = table.to_csv();
    assert!(csv.starts_with("function,n=2,n=4\nf1,"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn invalid_arguments_are_rejected() {
    assert!(matches!(
        InnerFunctions::new(2, DEFAULT_LAMBDA),
        Err(KstError::BadResolution { got: 2, .. })
    ));
    assert!(matches!(
        InnerFunctions::with_step(5, DEFAULT_LAMBDA, 0.5),
        Err(KstError::BadStep(_))
    ));
    assert!(matches!(InnerFunctions::new(5, [0.0, 1.0]), Err(KstError::BadWeights)));
    assert!(matches!(InnerFunctions::new(5, [1.0, 1.5]), Err(KstError::BadWeights)));
    let inner = build_inner_functions(4).unwrap();
    assert!(matches!(
        KBBasis::new(inner.clone(), 1, 3),
        Err(KstError::TooFewFunctions { functions: 2, degree: 3 })
    ));
    let kb = KBBasis::new(inner.clone(), 3, 3).unwrap();
    assert!(matches!(
        kb_eval(&kb, 6, Point2::new(0.5, 0.5)),
        Err(KstError::Index { index: 6, size: 6 })
    ));
    assert!(matches!(
        kb_eval(&kb, 0, Point2::new(1.5, 0.5)),
        Err(KstError::Domain { .. })
    ));
    assert!(matches!(
        k_polynomial(&inner, 2, Point2::new(0.5, -0.1)),
        Err(KstError::Domain { .. })
    ));
}
