//! Named test functions: the ten KST benchmark targets and manufactured
//! solutions with their derivatives for the PDE solvers.

use std::f64::consts::PI;

/// Benchmark target on `[0, 1]^2`.
#[derive(Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub f: fn(f64, f64) -> f64,
}

fn f1(x: f64, _y: f64) -> f64 {
    x * x
}
fn f2(x: f64, y: f64) -> f64 {
    x * y
}
fn f3(x: f64, _y: f64) -> f64 {
    x.sin()
}
fn f4(x: f64, y: f64) -> f64 {
    (x - y).tan() / 1f64.tan()
}
fn f5(x: f64, y: f64) -> f64 {
    (x * x - y * y).sin().sin().sin().sin()
}
fn f6(x: f64, y: f64) -> f64 {
    (1.0 - (x - 0.5).powi(2) - (y - 0.5).powi(2)).exp() / 1f64.exp()
}
fn f7(x: f64, y: f64) -> f64 {
    (1.0 + x * x + y * y).ln() / 4f64.ln()
}
fn f8(x: f64, y: f64) -> f64 {
    (x + 2.0 * y) / (3.0 * (1.0 + y * y + x * x))
}
fn f9(x: f64, y: f64) -> f64 {
    (x * x - y * y).tan() / 1f64.tan()
}
fn f10(x: f64, y: f64) -> f64 {
    (-(1.0 + (1.0 + (x * x - y * y).cos()).sin()).cos()).exp() / 1f64.exp()
}

pub const BENCHMARK: [TestFunction; 10] = [
    TestFunction { name: "f1", f: f1 },
    TestFunction { name: "f2", f: f2 },
    TestFunction { name: "f3", f: f3 },
    TestFunction { name: "f4", f: f4 },
    TestFunction { name: "f5", f: f5 },
    TestFunction { name: "f6", f: f6 },
    TestFunction { name: "f7", f: f7 },
    TestFunction { name: "f8", f: f8 },
    TestFunction { name: "f9", f: f9 },
    TestFunction { name: "f10", f: f10 },
];

pub fn benchmark_function(name: &str) -> Option<TestFunction> {
    if name == "one" {
        return Some(TestFunction { name: "one", f: |_, _| 1.0 });
    }
    BENCHMARK.iter().copied().find(|t| t.name == name)
}

/// A smooth function with first and second partial derivatives.
#[derive(Clone, Copy)]
pub struct Manufactured {
    pub name: &'static str,
    pub u: fn(f64, f64) -> f64,
    pub ux: fn(f64, f64) -> f64,
    pub uy: fn(f64, f64) -> f64,
    pub uxx: fn(f64, f64) -> f64,
    pub uxy: fn(f64, f64) -> f64,
    pub uyy: fn(f64, f64) -> f64,
}

impl Manufactured {
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        (self.uxx)(x, y) + (self.uyy)(x, y)
    }
}

pub const MANUFACTURED: [Manufactured; 6] = [
    Manufactured {
        name: "linear",
        u: |x, y| x + y,
        ux: |_, _| 1.0,
        uy: |_, _| 1.0,
        uxx: |_, _| 0.0,
        uxy: |_, _| 0.0,
        uyy: |_, _| 0.0,
    },
    Manufactured {
        name: "quadratic",
        u: |x, y| x * x + y * y,
        ux: |x, _| 2.0 * x,
        uy: |_, y| 2.0 * y,
        uxx: |_, _| 2.0,
        uxy: |_, _| 0.0,
        uyy: |_, _| 2.0,
    },
    Manufactured {
        name: "sinpi",
        u: |x, y| (PI * x).sin() * (PI * y).sin(),
        ux: |x, y| PI * (PI * x).cos() * (PI * y).sin(),
        uy: |x, y| PI * (PI * x).sin() * (PI * y).cos(),
        uxx: |x, y| -PI * PI * (PI * x).sin() * (PI * y).sin(),
        uxy: |x, y| PI * PI * (PI * x).cos() * (PI * y).cos(),
        uyy: |x, y| -PI * PI * (PI * x).sin() * (PI * y).sin(),
    },
    Manufactured {
        name: "sin2pi",
        u: |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).sin(),
        ux: |x, y| 2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).sin(),
        uy: |x, y| 2.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).cos(),
        uxx: |x, y| -4.0 * PI * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin(),
        uxy: |x, y| 4.0 * PI * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos(),
        uyy: |x, y| -4.0 * PI * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin(),
    },
    Manufactured {
        name: "exp",
        u: |x, y| (x + 0.5 * y).exp(),
        ux: |x, y| (x + 0.5 * y).exp(),
        uy: |x, y| 0.5 * (x + 0.5 * y).exp(),
        uxx: |x, y| (x + 0.5 * y).exp(),
        uxy: |x, y| 0.5 * (x + 0.5 * y).exp(),
        uyy: |x, y| 0.25 * (x + 0.5 * y).exp(),
    },
    Manufactured {
        name: "cubic",
        u: |x, y| x * x * x - 2.0 * x * y * y + y,
        ux: |x, y| 3.0 * x * x - 2.0 * y * y,
        uy: |x, y| -4.0 * x * y + 1.0,
        uxx: |x, _| 6.0 * x,
        uxy: |_, y| -4.0 * y,
        uyy: |x, _| -4.0 * x,
    },
];

pub fn manufactured(name: &str) -> Option<Manufactured> {
    MANUFACTURED.iter().copied().find(|m| m.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for m in MANUFACTURED {
            for &(x, y) in &[(0.2, 0.7), (0.55, 0.1), (0.9, 0.45)] {
                let dx = ((m.u)(x + h, y) - (m.u)(x - h, y)) / (2.0 * h);
                let dy = ((m.u)(x, y + h) - (m.u)(x, y - h)) / (2.0 * h);
                let dxx = ((m.ux)(x + h, y) - (m.ux)(x - h, y)) / (2.0 * h);
                let dxy = ((m.ux)(x, y + h) - (m.ux)(x, y - h)) / (2.0 * h);
                let dyy = ((m.uy)(x, y + h) - (m.uy)(x, y - h)) / (2.0 * h);
                for (a, b) in [
                    (dx, (m.ux)(x, y)),
                    (dy, (m.uy)(x, y)),
                    (dxx, (m.uxx)(x, y)),
                    (dxy, (m.uxy)(x, y)),
                    (dyy, (m.uyy)(x, y)),
                ] {
                    assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{}", m.name);
                }
            }
        }
    }

    #[test]
    fn benchmark_values() {
        assert_eq!((BENCHMARK[0].f)(0.5, 0.3), 0.25);
        assert!(((BENCHMARK[3].f)(1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(((BENCHMARK[5].f)(0.5, 0.5) - 1.0).abs() < 1e-15);
        assert!(((BENCHMARK[6].f)(1.0, 1.0) - 3f64.ln() / 4f64.ln()).abs() < 1e-15);
        assert!(benchmark_function("f10").is_some());
        assert!(benchmark_function("f11").is_none());
    }
}
