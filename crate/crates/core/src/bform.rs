//! Bernstein–Bézier polynomials on a single triangle.
//!
//! Coefficients of degree `d` are stored in canonical order: lexicographically
//! decreasing in `(a1, a2)`, so `(d,0,0), (d-1,1,0), (d-1,0,1), (d-2,2,0), ...`.

use thiserror::Error;

use crate::mesh::{orient, Point2};

pub const MAX_DEGREE: usize = 18;

#[derive(Debug, Error, PartialEq)]
pub enum BformError {
    #[error("triangle is degenerate")]
    Degenerate,
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
}

/// Barycentric coordinates with respect to a triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bary(pub [f64; 3]);

impl Bary {
    pub fn centroid() -> Self {
        Bary([1.0 / 3.0; 3])
    }
}

pub fn ncoef(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Position of `(a1, a2, a3)` in the canonical order of degree `a1+a2+a3`.
pub fn index_of(a1: usize, _a2: usize, a3: usize, d: usize) -> usize {
    let m = d - a1;
    m * (m + 1) / 2 + a3
}

pub fn index_of_multi(a: [usize; 3]) -> usize {
    let d = a[0] + a[1] + a[2];
    index_of(a[0], a[1], a[2], d)
}

/// All multi-indices of degree `d` in canonical order.
pub fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(ncoef(d));
    for a1 in (0..=d).rev() {
        for a2 in (0..=d - a1).rev() {
            out.push([a1, a2, d - a1 - a2]);
        }
    }
    out
}

fn check_degree(d: usize) -> Result<(), BformError> {
    if d > MAX_DEGREE {
        Err(BformError::DegreeTooLarge(d))
    } else {
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

pub fn multinomial(a: [usize; 3]) -> f64 {
    binomial(a[0] + a[1] + a[2], a[0]) * binomial(a[1] + a[2], a[1])
}

pub fn barycentric(v: &[Point2; 3], p: Point2) -> Result<Bary, BformError> {
    let det = orient(v[0], v[1], v[2]);
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm());
    if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
        return Err(BformError::Degenerate);
    }
    let b1 = orient(p, v[1], v[2]) / det;
    let b2 = orient(v[0], p, v[2]) / det;
    Ok(Bary([b1, b2, 1.0 - b1 - b2]))
}

pub fn domain_points(d: usize, v: &[Point2; 3]) -> Vec<([usize; 3], Point2)> {
    let dd = d.max(1) as f64;
    multi_indices(d)
        .into_iter()
        .map(|a| {
            let p = (a[0] as f64 / dd) * v[0] + (a[1] as f64 / dd) * v[1] + (a[2] as f64 / dd) * v[2];
            (a, p)
        })
        .collect()
}

/// De Casteljau evaluation.
pub fn eval_bform(d: usize, coeffs: &[f64], b: &Bary) -> f64 {
    assert_eq!(coeffs.len(), ncoef(d));
    let mut c = coeffs.to_vec();
    for k in (0..d).rev() {
        // reduce degree k+1 -> k in place
        for a1 in (0..=k).rev() {
            for a2 in (0..=k - a1).rev() {
                let a3 = k - a1 - a2;
                let i = index_of(a1, a2, a3, k);
                let v = b.0[0] * c[index_of(a1 + 1, a2, a3, k + 1)]
                    + b.0[1] * c[index_of(a1, a2 + 1, a3, k + 1)]
                    + b.0[2] * c[index_of(a1, a2, a3 + 1, k + 1)];
                c[i] = v;
            }
        }
    }
    c[0]
}

/// Values of all degree-`d` Bernstein polynomials at `b`, canonical order.
pub fn eval_basis_row(d: usize, b: &Bary) -> Vec<f64> {
    // Built by repeated degree raising of the adjoint of de Casteljau: stable
    // and free of explicit factorials.
    let mut w = vec![1.0];
    for k in 0..d {
        w = raise_adjoint(k, &w, &b.0);
    }
    w
}

/// Adjoint of one de Casteljau/reduction step: maps a degree-`k` vector `w`
/// to degree `k+1` with `(R^T w)_alpha = sum_i a_i w_{alpha - e_i}`.
pub fn raise_adjoint(k: usize, w: &[f64], a: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; ncoef(k + 1)];
    for (idx, m) in multi_indices(k).into_iter().enumerate() {
        let wv = w[idx];
        if wv == 0.0 {
            continue;
        }
        out[index_of(m[0] + 1, m[1], m[2], k + 1)] += a[0] * wv;
        out[index_of(m[0], m[1] + 1, m[2], k + 1)] += a[1] * wv;
        out[index_of(m[0], m[1], m[2] + 1, k + 1)] += a[2] * wv;
    }
    out
}

/// One reduction step `(R(a) c)_beta = sum_i a_i c_{beta + e_i}`, degree `d` to `d-1`.
pub fn reduce(d: usize, c: &[f64], a: &[f64; 3]) -> Vec<f64> {
    multi_indices(d - 1)
        .into_iter()
        .map(|m| {
            a[0] * c[index_of(m[0] + 1, m[1], m[2], d)]
                + a[1] * c[index_of(m[0], m[1] + 1, m[2], d)]
                + a[2] * c[index_of(m[0], m[1], m[2] + 1, d)]
        })
        .collect()
}

/// Gradients of the barycentric coordinates of a fixed triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriGeom {
    pub v: [Point2; 3],
    /// `dx[i] = d b_i / dx`
    pub dx: [f64; 3],
    pub dy: [f64; 3],
    pub area: f64,
}

impl TriGeom {
    pub fn new(v: [Point2; 3]) -> Result<Self, BformError> {
        let det = orient(v[0], v[1], v[2]);
        let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm());
        if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
            return Err(BformError::Degenerate);
        }
        let mut dx = [0.0; 3];
        let mut dy = [0.0; 3];
        for i in 0..3 {
            let (p, q) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            dx[i] = (p.y - q.y) / det;
            dy[i] = (q.x - p.x) / det;
        }
        Ok(Self {
            v,
            dx,
            dy,
            area: 0.5 * det.abs(),
        })
    }

    /// Directional barycentric coordinates of the Cartesian direction `(ux, uy)`.
    pub fn direction(&self, ux: f64, uy: f64) -> [f64; 3] {
        [
            ux * self.dx[0] + uy * self.dy[0],
            ux * self.dx[1] + uy * self.dy[1],
            ux * self.dx[2] + uy * self.dy[2],
        ]
    }

    pub fn barycentric(&self, p: Point2) -> Bary {
        let b1 = self.dx[0] * (p.x - self.v[1].x) + self.dy[0] * (p.y - self.v[1].y);
        let b2 = self.dx[1] * (p.x - self.v[2].x) + self.dy[1] * (p.y - self.v[2].y);
        Bary([b1, b2, 1.0 - b1 - b2])
    }

    /// Directions for `(px, py)` partial-derivative orders, e.g. `(1, 1)` is `[x, y]`.
    fn directions(&self, px: usize, py: usize) -> Vec<[f64; 3]> {
        let mut out = vec![self.dx; px];
        out.extend(std::iter::repeat_n(self.dy, py));
        out
    }
}

fn falling(d: usize, k: usize) -> f64 {
    (0..k).map(|i| (d - i) as f64).product()
}

/// Row `r` with `r . c = D_{u_1} ... D_{u_k} p(b)` for the directional
/// derivatives along barycentric directions `dirs`.
pub fn directional_row(d: usize, b: &Bary, dirs: &[[f64; 3]]) -> Vec<f64> {
    let k = dirs.len();
    if k > d {
        return vec![0.0; ncoef(d)];
    }
    let mut w = eval_basis_row(d - k, b);
    for (j, a) in dirs.iter().enumerate() {
        w = raise_adjoint(d - k + j, &w, a);
    }
    let s = falling(d, k);
    w.iter_mut().for_each(|x| *x *= s);
    w
}

/// Derivative coefficient map `G` (rows: degree `d-k` coefficients, columns:
/// degree `d` coefficients) for the directions `dirs`, including the
/// `d!/(d-k)!` factor.
pub fn derivative_map(d: usize, dirs: &[[f64; 3]]) -> Vec<Vec<f64>> {
    let k = dirs.len();
    let n_low = ncoef(d - k);
    (0..ncoef(d))
        .map(|col| {
            let mut c = vec![0.0; ncoef(d)];
            c[col] = 1.0;
            let mut cur = c;
            for (j, a) in dirs.iter().enumerate() {
                cur = reduce(d - j, &cur, a);
            }
            let s = falling(d, k);
            cur.iter_mut().for_each(|x| *x *= s);
            debug_assert_eq!(cur.len(), n_low);
            cur
        })
        .collect::<Vec<_>>()
        .transpose_cols(n_low)
}

trait TransposeCols {
    fn transpose_cols(self, nrows: usize) -> Vec<Vec<f64>>;
}

impl TransposeCols for Vec<Vec<f64>> {
    fn transpose_cols(self, nrows: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.len()]; nrows];
        for (j, col) in self.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[i][j] = v;
            }
        }
        out
    }
}

/// Rows mapping local coefficients to Cartesian partials `d^(px+py) / dx^px dy^py`.
pub fn derivative_rows(d: usize, geom: &TriGeom, b: &Bary, orders: &[(usize, usize)]) -> Vec<Vec<f64>> {
    orders
        .iter()
        .map(|&(px, py)| directional_row(d, b, &geom.directions(px, py)))
        .collect()
}

/// Evaluates the `(px, py)` partial of a local B-form.
pub fn eval_partial(d: usize, coeffs: &[f64], geom: &TriGeom, b: &Bary, px: usize, py: usize) -> f64 {
    let dirs = geom.directions(px, py);
    let k = dirs.len();
    if k > d {
        return 0.0;
    }
    let mut c = coeffs.to_vec();
    for (j, a) in dirs.iter().enumerate() {
        c = reduce(d - j, &c, a);
    }
    falling(d, k) * eval_bform(d - k, &c, b)
}

/// Exact Gram matrix `int_T B_alpha B_beta` (row-major, `ncoef(d)^2`).
pub fn product_integral_matrix(d: usize, area: f64) -> Vec<f64> {
    let idx = multi_indices(d);
    let n = idx.len();
    let denom = binomial(2 * d, d) * binomial(2 * d + 2, 2);
    let mut m = vec![0.0; n * n];
    for (i, a) in idx.iter().enumerate() {
        for (j, b) in idx.iter().enumerate().skip(i) {
            let num: f64 = (0..3).map(|s| binomial(a[s] + b[s], a[s])).product();
            let v = area * num / denom;
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

/// Local B-form on one triangle.
#[derive(Clone, Debug)]
pub struct LocalBform {
    pub triangle: usize,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl LocalBform {
    pub fn new(triangle: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self, BformError> {
        check_degree(degree)?;
        if coeffs.len() != ncoef(degree) {
            return Err(BformError::Length {
                expected: ncoef(degree),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            triangle,
            degree,
            coeffs,
        })
    }

    pub fn eval(&self, b: &Bary) -> f64 {
        eval_bform(self.degree, &self.coeffs, b)
    }
}

pub fn validate_degree(d: usize) -> Result<(), BformError> {
    check_degree(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_gauss;
    use faer::linalg::solvers::Solve;
    use faer::Mat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> [Point2; 3] {
        [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
    }

    fn skew() -> [Point2; 3] {
        [Point2::new(0.2, -0.1), Point2::new(1.3, 0.4), Point2::new(0.5, 1.1)]
    }

    fn random_bary(rng: &mut ChaCha8Rng) -> Bary {
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        Bary([1.0 - u - v, u, v])
    }

    /// Coefficients interpolating `f` at the domain points (Vandermonde solve
    /// on the Bernstein basis).
    fn interp_coeffs(d: usize, v: &[Point2; 3], f: impl Fn(Point2) -> f64) -> Vec<f64> {
        let pts = domain_points(d, v);
        let n = pts.len();
        let a = Mat::<f64>::from_fn(n, n, |i, j| {
            let b = barycentric(v, pts[i].1).unwrap();
            eval_basis_row(d, &b)[j]
        });
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| f(pts[i].1));
        let x = a.partial_piv_lu().solve(&rhs);
        (0..n).map(|i| x[(i, 0)]).collect()
    }

    fn explicit_sum(d: usize, c: &[f64], b: &Bary) -> f64 {
        multi_indices(d)
            .iter()
            .zip(c)
            .map(|(a, ci)| {
                ci * multinomial(*a)
                    * b.0[0].powi(a[0] as i32)
                    * b.0[1].powi(a[1] as i32)
                    * b.0[2].powi(a[2] as i32)
            })
            .sum()
    }

    #[test]
    fn canonical_order() {
        assert_eq!(
            multi_indices(2),
            vec![[2, 0, 0], [1, 1, 0], [1, 0, 1], [0, 2, 0], [0, 1, 1], [0, 0, 2]]
        );
        for d in 0..8 {
            for (i, a) in multi_indices(d).into_iter().enumerate() {
                assert_eq!(index_of_multi(a), i);
            }
        }
    }

    #[test]
    fn barycentric_examples() {
        let v = unit();
        assert_eq!(barycentric(&v, v[0]).unwrap(), Bary([1.0, 0.0, 0.0]));
        let b = barycentric(&v, Point2::new(0.25, 0.25)).unwrap();
        for (x, y) in b.0.iter().zip([0.5, 0.25, 0.25]) {
            assert!((x - y).abs() < 1e-15);
        }
        let c = barycentric(&v, Point2::new(1.0 / 3.0, 1.0 / 3.0)).unwrap();
        for x in c.0 {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let flat = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert_eq!(barycentric(&flat, v[0]), Err(BformError::Degenerate));
        let g = TriGeom::new(skew()).unwrap();
        let p = Point2::new(0.6, 0.4);
        let (b1, b2) = (g.barycentric(p), barycentric(&skew(), p).unwrap());
        for i in 0..3 {
            assert!((b1.0[i] - b2.0[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_point_counts() {
        let v = unit();
        let p1: Vec<Point2> = domain_points(1, &v).into_iter().map(|x| x.1).collect();
        assert_eq!(p1, v.to_vec());
        assert_eq!(domain_points(2, &v).len(), 6);
        let p5 = domain_points(5, &v);
        assert_eq!(p5.len(), 21);
        for i in 0..p5.len() {
            for j in i + 1..p5.len() {
                assert!(p5[i].1.dist(p5[j].1) > 1e-3);
            }
        }
    }

    #[test]
    fn basis_row_values() {
        assert_eq!(eval_basis_row(3, &Bary([1.0, 0.0, 0.0]))[0], 1.0);
        assert!(eval_basis_row(3, &Bary([1.0, 0.0, 0.0]))[1..]
            .iter()
            .all(|&x| x == 0.0));
        let row = eval_basis_row(2, &Bary::centroid());
        assert!((row[1] - 2.0 / 9.0).abs() < 1e-15);
        assert!((row[0] - 1.0 / 9.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let b = random_bary(&mut rng);
            let s: f64 = eval_basis_row(7, &b).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn eval_examples() {
        let b = Bary([0.2, 0.3, 0.5]);
        assert!((eval_bform(4, &vec![1.0; ncoef(4)], &b) - 1.0).abs() < 1e-15);
        assert!((eval_bform(1, &[0.0, 1.0, 0.0], &b) - 0.3).abs() < 1e-15);
        let v = skew();
        let c = interp_coeffs(2, &v, |p| p.x * p.x);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let b = random_bary(&mut rng);
            let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
            assert!((eval_bform(2, &c, &b) - p.x * p.x).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_reproduction() {
        let v = skew();
        let f = |p: Point2| 1.0 + p.x - 2.0 * p.y + p.x.powi(3) * p.y - 0.5 * p.y.powi(4) + p.x.powi(2);
        let c = interp_coeffs(4, &v, f);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let b = random_bary(&mut rng);
            let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
            assert!((eval_bform(4, &c, &b) - f(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_examples() {
        let v = skew();
        let g = TriGeom::new(v).unwrap();
        let cx = interp_coeffs(1, &v, |p| p.x);
        let b = Bary([0.3, 0.3, 0.4]);
        let rows = derivative_rows(1, &g, &b, &[(1, 0), (0, 1)]);
        let dot = |r: &Vec<f64>, c: &[f64]| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        assert!((dot(&rows[0], &cx) - 1.0).abs() < 1e-13);
        assert!(dot(&rows[1], &cx).abs() < 1e-13);

        let c2 = interp_coeffs(2, &v, |p| p.x * p.x);
        let c3 = interp_coeffs(2, &v, |p| p.x * p.x + p.y * p.y);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for _ in 0..10 {
            let b = random_bary(&mut rng);
            let rows = derivative_rows(2, &g, &b, &[(2, 0), (1, 1), (0, 2)]);
            assert!((dot(&rows[0], &c2) - 2.0).abs() < 1e-10);
            assert!(dot(&rows[1], &c2).abs() < 1e-10);
            let lap = dot(&rows[0], &c3) + dot(&rows[2], &c3);
            assert!((lap - 4.0).abs() < 1e-10);
            // finite-difference oracle
            let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
            let s = |q: Point2| eval_bform(2, &c3, &g.barycentric(q));
            let fd = (s(Point2::new(p.x + h, p.y)) + s(Point2::new(p.x - h, p.y))
                + s(Point2::new(p.x, p.y + h))
                + s(Point2::new(p.x, p.y - h))
                - 4.0 * s(p))
                / (h * h);
            assert!((fd - 4.0).abs() < 1e-4);
        }
    }

    #[test]
    fn derivative_rows_match_finite_differences() {
        let v = skew();
        let g = TriGeom::new(v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 6;
        let c: Vec<f64> = (0..ncoef(d)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = |q: Point2| eval_bform(d, &c, &g.barycentric(q));
        let h = 1e-5;
        for _ in 0..10 {
            let b = random_bary(&mut rng);
            let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
            let rows = derivative_rows(d, &g, &b, &[(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
            let val: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(&c).map(|(a, b)| a * b).sum())
                .collect();
            let ex = Point2::new(h, 0.0);
            let ey = Point2::new(0.0, h);
            let fx = (s(p + ex) - s(p - ex)) / (2.0 * h);
            let fy = (s(p + ey) - s(p - ey)) / (2.0 * h);
            let fxx = (s(p + ex) - 2.0 * s(p) + s(p - ex)) / (h * h);
            let fyy = (s(p + ey) - 2.0 * s(p) + s(p - ey)) / (h * h);
            let fxy = (s(p + ex + ey) - s(p + ex - ey) - s(p - ex + ey) + s(p - ex - ey)) / (4.0 * h * h);
            let fd = [fx, fy, fxx, fxy, fyy];
            for k in 0..5 {
                let scale = fd[k].abs().max(1.0);
                let tol = if k < 2 { 1e-5 } else { 1e-3 };
                assert!((val[k] - fd[k]).abs() / scale < tol, "k={k} {} vs {}", val[k], fd[k]);
            }
            for (k, &(px, py)) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)].iter().enumerate() {
                assert!((eval_partial(d, &c, &g, &b, px, py) - val[k]).abs() < 1e-9 * val[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn derivative_map_agrees_with_rows() {
        let g = TriGeom::new(skew()).unwrap();
        let d = 5;
        let dirs = [g.dx, g.dy];
        let gm = derivative_map(d, &dirs);
        let b = Bary([0.1, 0.6, 0.3]);
        let low = eval_basis_row(d - 2, &b);
        let row = directional_row(d, &b, &dirs);
        for j in 0..ncoef(d) {
            let v: f64 = (0..ncoef(d - 2)).map(|i| low[i] * gm[i][j]).sum();
            assert!((v - row[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn product_integrals() {
        let m0 = product_integral_matrix(0, 0.5);
        assert_eq!(m0, vec![0.5]);
        let m2 = product_integral_matrix(2, 0.5);
        // int_T b1^4 = 2 * area * 4! / 6!
        assert!((m2[0] - 1.0 / 30.0).abs() < 1e-16);
        let total: f64 = m2.iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
        // Gauss quadrature oracle of sufficient degree
        for d in [1usize, 3, 5] {
            let v = skew();
            let g = TriGeom::new(v).unwrap();
            let m = product_integral_matrix(d, g.area);
            let n = ncoef(d);
            let rule = triangle_gauss(2 * d);
            let mut q = vec![0.0; n * n];
            for (b, w) in rule {
                let row = eval_basis_row(d, &b);
                for i in 0..n {
                    for j in 0..n {
                        q[i * n + j] += w * g.area * row[i] * row[j];
                    }
                }
            }
            for (a, b) in m.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn degree_cap() {
        assert!(LocalBform::new(0, 19, vec![0.0; ncoef(19)]).is_err());
        assert!(LocalBform::new(0, 2, vec![0.0; 5]).is_err());
        let f = LocalBform::new(0, 18, vec![1.0; ncoef(18)]).unwrap();
        assert!((f.eval(&Bary([0.2, 0.2, 0.6])) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn de_casteljau_matches_sum(
            d in 0usize..=10,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..ncoef(d)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = random_bary(&mut rng);
            let lhs = eval_bform(d, &c, &b);
            let rhs = explicit_sum(d, &c, &b);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let row = eval_basis_row(d, &b);
            let dot: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - dot).abs() < 1e-12);
        }
    }
}
