use proptest::prelude::*;
use splinekit::bform::{
    eval_basis_row, eval_bform, eval_partial, multi_indices, ncoef, product_integral_matrix, Bary, TriGeom,
};
use splinekit::mesh::Point2;
use splinekit::quadrature::triangle_gauss;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `sum_alpha c_alpha d!/(a1! a2! a3!) b1^a1 b2^a2 b3^a3`.
fn bernstein_sum(d: usize, c: &[f64], b: [f64; 3]) -> f64 {
    multi_indices(d)
        .iter()
        .zip(c)
        .map(|(a, ci)| {
            let w = factorial(d) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]));
            ci * w * b[0].powi(a[0] as i32) * b[1].powi(a[1] as i32) * b[2].powi(a[2] as i32)
        })
        .sum()
}

fn bary_strategy() -> impl Strategy<Value = [f64; 3]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| {
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        [1.0 - u - v, u, v]
    })
}

fn triangle() -> [Point2; 3] {
    [Point2::new(0.1, 0.2), Point2::new(1.3, 0.4), Point2::new(0.5, 1.1)]
}

proptest! {
    #[test]
    fn de_casteljau_matches_bernstein_sum(
        d in 0usize..9,
        b in bary_strategy(),
        seed in prop::collection::vec(-1.0..1.0f64, 45),
    ) {
        let c = &seed[..ncoef(d)];
        let got = eval_bform(d, c, &Bary(b));
        let want = bernstein_sum(d, c, b);
        prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn basis_is_partition_of_unity(d in 0usize..12, b in bary_strategy()) {
        let row = eval_basis_row(d, &Bary(b));
        prop_assert_eq!(row.len(), ncoef(d));
        prop_assert!(row.iter().all(|&v| v >= -1e-15));
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn basis_row_dot_coefficients_is_value(
        d in 1usize..8,
        b in bary_strategy(),
        seed in prop::collection::vec(-1.0..1.0f64, 36),
    ) {
        let c = &seed[..ncoef(d)];
        let row = eval_basis_row(d, &Bary(b));
        let dot: f64 = row.iter().zip(c).map(|(r, x)| r * x).sum();
        prop_assert!((dot - eval_bform(d, c, &Bary(b))).abs() < 1e-13);
    }

    #[test]
    fn partials_match_central_differences(
        d in 1usize..7,
        b in bary_strategy(),
        seed in prop::collection::vec(-1.0..1.0f64, 28),
    ) {
        let c = &seed[..ncoef(d)];
        let g = TriGeom::new(triangle()).unwrap();
        let v = triangle();
        let p = Point2::new(
            b[0] * v[0].x + b[1] * v[1].x + b[2] * v[2].x,
            b[0] * v[0].y + b[1] * v[1].y + b[2] * v[2].y,
        );
        // polynomial evaluation extends past the triangle, so differences are fine at edges
        let f = |x: f64, y: f64| eval_bform(d, c, &g.barycentric(Point2::new(x, y)));
        let h = 1e-5;
        let fx = (f(p.x + h, p.y) - f(p.x - h, p.y)) / (2.0 * h);
        let fy = (f(p.x, p.y + h) - f(p.x, p.y - h)) / (2.0 * h);
        let fxy = (f(p.x + h, p.y + h) - f(p.x + h, p.y - h) - f(p.x - h, p.y + h) + f(p.x - h, p.y - h)) / (4.0 * h * h);
        let bb = g.barycentric(p);
        prop_assert!((eval_partial(d, c, &g, &bb, 1, 0) - fx).abs() < 1e-6 * (1.0 + fx.abs()));
        prop_assert!((eval_partial(d, c, &g, &bb, 0, 1) - fy).abs() < 1e-6 * (1.0 + fy.abs()));
        prop_assert!((eval_partial(d, c, &g, &bb, 1, 1) - fxy).abs() < 1e-4 * (1.0 + fxy.abs()));
    }
}

#[test]
fn product_integrals_match_quadrature() {
    let v = triangle();
    let area = 0.5 * ((v[1] - v[0]).cross(v[2] - v[0])).abs();
    for d in 1..=5 {
        let n = ncoef(d);
        let m = product_integral_matrix(d, area);
        let rule = triangle_gauss(2 * d);
        for i in 0..n {
            for j in 0..n {
                let q: f64 = rule
                    .iter()
                    .map(|(b, w)| {
                        let r = eval_basis_row(d, b);
                        w * r[i] * r[j]
                    })
                    .sum::<f64>()
                    * area;
                assert!((m[i * n + j] - q).abs() < 1e-14, "d={d} ({i},{j}): {} vs {q}", m[i * n + j]);
            }
        }
    }
}

#[test]
fn vertex_values_are_corner_coefficients() {
    let d = 4;
    let c: Vec<f64> = (0..ncoef(d)).map(|i| i as f64).collect();
    let idx = multi_indices(d);
    for (k, corner) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
        let pos = idx.iter().position(|a| a[k] == d).unwrap();
        assert_eq!(eval_bform(d, &c, &Bary(*corner)), c[pos]);
    }
}
