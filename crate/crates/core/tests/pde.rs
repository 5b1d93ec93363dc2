use std::sync::Arc;

use splinekit::constraints::SplineSpace;
use splinekit::fit::Spline;
use splinekit::functions::manufactured;
use splinekit::mesh::{square_grid, Point2};
use splinekit::pde::{
    convergence_study, error_norms, residual_norm, solve_elliptic, EdgeSites, EllipticOptions, EllipticProblem,
    PdeError, Rate,
};

/// Gauss-Legendre nodes and weights on [0, 1] by Newton on `P_n`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 + x), 0.5 * w)
        })
        .collect()
}

/// `||L s + f||_{L2}` with a collapsed tensor rule on every triangle.
fn residual_oracle(pb: &EllipticProblem, s: &Spline, n: usize) -> f64 {
    let gl = gauss_legendre(n);
    let mesh = s.space.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let jac = 2.0 * mesh.triangle_area(t);
        for &(u, wu) in &gl {
            for &(v, wv) in &gl {
                let (l1, l2) = (u, (1.0 - u) * v);
                let p = a + l1 * (b - a) + l2 * (c - a);
                let d = |px, py| s.eval_partial(p, px, py).unwrap();
                let ls = (pb.a11)(p) * d(2, 0)
                    + 2.0 * (pb.a12)(p) * d(1, 1)
                    + (pb.a22)(p) * d(0, 2)
                    + (pb.b1)(p) * d(1, 0)
                    + (pb.b2)(p) * d(0, 1)
                    + (pb.c0)(p) * d(0, 0);
                let e = ls + (pb.f)(p);
                acc += wu * wv * (1.0 - u) * jac * e * e;
            }
        }
    }
    acc.sqrt()
}

#[test]
fn residual_norm_matches_tensor_quadrature_for_polynomials() {
    // Δs + f is linear here, so both rules are exact
    let space = SplineSpace::new(square_grid(2), 3, 1).unwrap();
    let c = space.coeffs_of(|p| p.x * p.x * p.y - 0.3 * p.y * p.y * p.y + p.x);
    let s = Spline::new(space, c);
    let pb = EllipticProblem::poisson(Arc::new(|p| 1.0 + 2.0 * p.x - p.y), Arc::new(|_| 0.0));
    let got = residual_norm(&pb, &s);
    let want = residual_oracle(&pb, &s, 6);
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn residual_norm_matches_tensor_quadrature_for_smooth_data() {
    let m = manufactured("sin2pi").unwrap();
    let space = SplineSpace::new(square_grid(4), 5, 1).unwrap();
    let pb = EllipticProblem::variable_for(m);
    let (s, rep) = solve_elliptic(&space, &pb, &EllipticOptions::default()).unwrap();
    let want = residual_oracle(&pb, &s, 16);
    let got = rep.epsilon1.unwrap();
    assert!((got - want).abs() <= 1e-4 * want, "{got} vs {want}");
}

#[test]
fn boundary_values_are_matched_along_every_edge() {
    let m = manufactured("exp").unwrap();
    let space = SplineSpace::new(square_grid(4), 8, 1).unwrap();
    let (s, _) = solve_elliptic(&space, &EllipticProblem::poisson_for(m), &EllipticOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for i in 0..250 {
        let t = i as f64 / 250.0;
        for p in [
            Point2::new(t, 0.0),
            Point2::new(1.0, t),
            Point2::new(1.0 - t, 1.0),
            Point2::new(0.0, 1.0 - t),
        ] {
            worst = worst.max((s.eval(p).unwrap() - (m.u)(p.x, p.y)).abs());
        }
    }
    assert!(worst <= 1e-7, "{worst}");
}

#[test]
fn errors_decrease_under_refinement() {
    let m = manufactured("sinpi").unwrap();
    let rep = convergence_study(
        &EllipticProblem::poisson_for(m),
        &m,
        &square_grid(1),
        4,
        1,
        3,
        501,
        &EllipticOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.rows.len(), 3);
    for w in rep.rows.windows(2) {
        assert!(w[1].mesh_size < w[0].mesh_size);
        assert!(w[1].l2 < w[0].l2);
        assert!(w[1].grad_l2 < w[0].grad_l2);
        assert!(w[1].rmse < w[0].rmse);
        assert!(w[1].max < w[0].max);
        assert!(w[1].epsilon1 < w[0].epsilon1);
    }
    let Rate::Slope(k) = rep.l2_rate else { panic!("not exact") };
    assert!(k > 2.0, "{k}");
}

#[test]
fn quadratic_solution_is_reproduced_exactly() {
    let m = manufactured("quadratic").unwrap();
    let rep = convergence_study(
        &EllipticProblem::poisson_for(m),
        &m,
        &square_grid(1),
        3,
        1,
        3,
        51,
        &EllipticOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.l2_rate, Rate::Exact);
    assert_eq!(rep.grad_rate, Rate::Exact);
    assert!(rep.to_csv().contains("# l2_rate=EXACT"));
}

#[test]
fn variable_coefficients_reproduce_a_cubic() {
    let m = manufactured("cubic").unwrap();
    for mode in [EdgeSites::PerTriangle, EdgeSites::Deduplicated] {
        let space = SplineSpace::new(square_grid(2), 3, 1).unwrap();
        let opts = EllipticOptions {
            edge_sites: mode,
            ..EllipticOptions::default()
        };
        let (s, rep) = solve_elliptic(&space, &EllipticProblem::variable_for(m), &opts).unwrap();
        let e = error_norms(&s, &m, 41);
        assert!(e.max < 1e-9, "{mode:?}: {}", e.max);
        assert!(rep.epsilon1.unwrap() < 1e-9);
    }
}

#[test]
fn oversampled_collocation_is_no_worse_than_square() {
    let m = manufactured("sinpi").unwrap();
    let space = SplineSpace::new(square_grid(4), 4, 1).unwrap();
    let pb = EllipticProblem::poisson_for(m);
    let (s4, _) = solve_elliptic(&space, &pb, &EllipticOptions::default()).unwrap();
    let opts = EllipticOptions {
        dprime: 6,
        ..EllipticOptions::default()
    };
    let (s6, _) = solve_elliptic(&space, &pb, &opts).unwrap();
    let (e4, e6) = (error_norms(&s4, &m, 101).l2, error_norms(&s6, &m, 101).l2);
    assert!(e6 < 2.0 * e4, "{e6} vs {e4}");
}

#[test]
fn convergence_study_needs_three_levels() {
    let m = manufactured("linear").unwrap();
    let err = convergence_study(
        &EllipticProblem::poisson_for(m),
        &m,
        &square_grid(1),
        3,
        1,
        2,
        11,
        &EllipticOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, PdeError::TooFewLevels(2)));
}
