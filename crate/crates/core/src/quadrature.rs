//! Quadrature rules on the reference triangle. Weights sum to 1, so a rule
//! integrates `f` over `T` as `area(T) * sum w_i f(x_i)`.

use crate::bform::Bary;

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Collapsed-coordinate Gauss rule exact for polynomials of total degree `deg`.
pub fn triangle_gauss(deg: usize) -> Vec<(Bary, f64)> {
    let n = deg / 2 + 1;
    let g = gauss_legendre01(n);
    let gu = gauss_legendre01(n + 1);
    let mut out = Vec::with_capacity(n * (n + 1));
    for &(u, wu) in &gu {
        for &(v, wv) in &g {
            let x = u;
            let y = v * (1.0 - u);
            // Jacobian (1 - u); reference area 1/2 normalized away
            out.push((Bary([1.0 - x - y, x, y]), 2.0 * wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Symmetric 7-point rule of degree 5.
pub fn dunavant7() -> Vec<(Bary, f64)> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let mut out = vec![(Bary::centroid(), 0.225)];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        out.push((Bary([b, a, a]), w));
        out.push((Bary([a, b, a]), w));
        out.push((Bary([a, a, b]), w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // int over the unit right triangle of x^i y^j = i! j! / (i+j+2)!
    fn exact(i: u32, j: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    fn apply(rule: &[(Bary, f64)], i: i32, j: i32) -> f64 {
        0.5 * rule
            .iter()
            .map(|(b, w)| w * b.0[1].powi(i) * b.0[2].powi(j))
            .sum::<f64>()
    }

    #[test]
    fn legendre_weights() {
        for n in 1..12 {
            let s: f64 = gauss_legendre01(n).iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_rule_exactness() {
        for deg in 0..=16 {
            let rule = triangle_gauss(deg);
            for i in 0..=deg as u32 {
                for j in 0..=(deg as u32 - i) {
                    let q = apply(&rule, i as i32, j as i32);
                    assert!((q - exact(i, j)).abs() < 1e-14, "deg {deg} x^{i} y^{j}");
                }
            }
        }
    }

    #[test]
    fn dunavant_degree_five() {
        let rule = dunavant7();
        let s: f64 = rule.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-15);
        for i in 0..=5u32 {
            for j in 0..=(5 - i) {
                assert!((apply(&rule, i as i32, j as i32) - exact(i, j)).abs() < 1e-15);
            }
        }
        // not exact at degree 6
        assert!((apply(&rule, 6, 0) - exact(6, 0)).abs() > 1e-8);
    }
}
