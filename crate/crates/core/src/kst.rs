//! Kolmogorov superposition in two variables: inner functions, K-polynomials,
//! KB splines (univariate B-splines composed with the inner sums), their
//! smoothed LKB versions in `S^2_8` and discrete least-squares fitting with
//! them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::{interpolation_matrix, SplineSpace};
use crate::fit::{fmt_real, grid_points, FitError, PenalizedFitter, Spline};
use crate::functions::TestFunction;
use crate::linalg::LeastSquaresFactor;
use crate::lsq::LsqConfig;
use crate::mesh::{square_grid, Point2};

/// Input dimension.
pub const DIM: usize = 2;
/// Number of inner functions, `2 DIM + 1`.
pub const NQ: usize = 2 * DIM + 1;
/// Digit base of the inner function construction.
pub const GAMMA: u64 = 6;

#[derive(Debug, Error)]
pub enum KstError {
    #[error("resolution must be between 3 and {max}, got {got}")]
    BadResolution { got: usize, max: usize },
    #[error("point ({x}, {y}) lies outside the unit square")]
    Domain { x: f64, y: f64 },
    #[error("basis index {index} out of range (size {size})")]
    Index { index: usize, size: usize },
    #[error("{functions} B-splines cannot have degree {degree}")]
    TooFewFunctions { functions: usize, degree: usize },
    #[error("digit exponent step must be at least 1, got {0}")]
    BadStep(f64),
    #[error("weights must be positive with sum at most {DIM}")]
    BadWeights,
    #[error("bad basis directory: {0}")]
    Basis(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Fit(#[from] FitError),
}

const MAX_RESOLUTION: usize = 20;

/// The monotone inner functions `phi_q`, `q = 0..=4`, and weights `lambda`.
///
/// A base function `psi` is defined on the base-6 grid of depth `resolution`
/// by mapping the digits `i_k` of `x` to `sum i_k 6^-(1 + (k-1) step)`, and
/// is linear between grid points. With the default `step = 2` it is strictly
/// increasing and `psi(1) = sum_k 5 * 6^-(2k-1) = 6/7`. It is extended past 1 by
/// `psi(1 + t) = psi(1) + psi(t)`, and the shifted copies
/// `phi_q(x) = psi(x + q/30) / psi(1 + 4/30)` take values in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct InnerFunctions {
    pub lambda: [f64; DIM],
    pub resolution: usize,
    /// Digit `k` has weight `6^-(1 + (k-1) step)`.
    pub step: f64,
    psi_one: f64,
    scale: f64,
    norm: f64,
}

/// `(1, sqrt 2 - 1/2)`: positive and rationally independent, so the inner
/// sums cover most of the B-spline range `[0, 2]`.
pub const DEFAULT_LAMBDA: [f64; DIM] = [1.0, std::f64::consts::SQRT_2 - 0.5];
pub const DEFAULT_RESOLUTION: usize = 8;

pub const DEFAULT_STEP: f64 = 2.0;

impl InnerFunctions {
    pub fn new(resolution: usize, lambda: [f64; DIM]) -> Result<Self, KstError> {
        Self::with_step(resolution, lambda, DEFAULT_STEP)
    }

    pub fn with_step(resolution: usize, lambda: [f64; DIM], step: f64) -> Result<Self, KstError> {
        if !(3..=MAX_RESOLUTION).contains(&resolution) {
            return Err(KstError::BadResolution {
                got: resolution,
                max: MAX_RESOLUTION,
            });
        }
        if step.is_nan() || step < 1.0 {
            return Err(KstError::BadStep(step));
        }
        if lambda.iter().any(|&l| !(l > 0.0 && l <= 1.0)) || lambda.iter().sum::<f64>() > DIM as f64 {
            return Err(KstError::BadWeights);
        }
        let mut inner = Self {
            lambda,
            resolution,
            step,
            psi_one: (GAMMA - 1) as f64 / GAMMA as f64 / (1.0 - (GAMMA as f64).powf(-step)),
            scale: (GAMMA as f64).powi(resolution as i32),
            norm: 1.0,
        };
        inner.norm = inner.psi_ext(1.0 + shift(NQ - 1));
        Ok(inner)
    }

    /// `psi` at the grid point `j / 6^resolution`, `0 <= j <= 6^resolution`.
    fn psi_grid(&self, j: u64) -> f64 {
        let top = GAMMA.pow(self.resolution as u32);
        if j >= top {
            return self.psi_one;
        }
        let mut v = 0.0;
        let mut rest = j;
        // least significant digit first: digit k (1-based from the left)
        for k in (1..=self.resolution).rev() {
            let digit = rest % GAMMA;
            rest /= GAMMA;
            v += digit as f64 * (GAMMA as f64).powf(-(1.0 + (k - 1) as f64 * self.step));
        }
        v
    }

    /// Base function on `[0, 1]`.
    pub fn psi(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let s = x * self.scale;
        let top = GAMMA.pow(self.resolution as u32);
        let j = (s.floor() as u64).min(top - 1);
        let t = s - j as f64;
        let (a, b) = (self.psi_grid(j), self.psi_grid(j + 1));
        a + t * (b - a)
    }

    fn psi_ext(&self, y: f64) -> f64 {
        if y <= 1.0 {
            self.psi(y)
        } else {
            self.psi_one + self.psi(y - 1.0)
        }
    }

    /// `phi_q(x)` for `x` in `[0, 1]`.
    pub fn phi(&self, q: usize, x: f64) -> f64 {
        self.psi_ext(x + shift(q)) / self.norm
    }

    /// `sum_p lambda_p phi_q(x_p)`.
    pub fn inner_sum(&self, q: usize, x: Point2) -> f64 {
        self.lambda[0] * self.phi(q, x.x) + self.lambda[1] * self.phi(q, x.y)
    }

    /// Grid `t_j = j / 6^resolution` and the values of `phi_q` there.
    pub fn table(&self, q: usize) -> (Vec<f64>, Vec<f64>) {
        let top = GAMMA.pow(self.resolution as u32);
        let knots: Vec<f64> = (0..=top).map(|j| j as f64 / self.scale).collect();
        let vals = knots.iter().map(|&t| self.phi(q, t)).collect();
        (knots, vals)
    }
}

fn shift(q: usize) -> f64 {
    q as f64 / (GAMMA * (GAMMA - 1)) as f64
}

pub fn build_inner_functions(resolution: usize) -> Result<InnerFunctions, KstError> {
    InnerFunctions::new(resolution, DEFAULT_LAMBDA)
}

fn check_unit(x: Point2) -> Result<(), KstError> {
    if (0.0..=1.0).contains(&x.x) && (0.0..=1.0).contains(&x.y) {
        Ok(())
    } else {
        Err(KstError::Domain { x: x.x, y: x.y })
    }
}

/// `sum_q (lambda_1 phi_q(x_1) + lambda_2 phi_q(x_2))^n`.
pub fn k_polynomial(inner: &InnerFunctions, n: u32, x: Point2) -> Result<f64, KstError> {
    check_unit(x)?;
    Ok((0..NQ).map(|q| inner.inner_sum(q, x).powi(n as i32)).sum())
}

/// Clamped B-splines of degree `k` with equally spaced knots on `[0, DIM]`
/// composed with the inner sums.
#[derive(Clone, Debug)]
pub struct KBBasis {
    pub inner: InnerFunctions,
    pub n: usize,
    pub k: usize,
    pub knots: Vec<f64>,
}

impl KBBasis {
    /// `n * DIM` functions of degree `k`.
    pub fn new(inner: InnerFunctions, n: usize, k: usize) -> Result<Self, KstError> {
        let m = n * DIM;
        if m < k + 1 {
            return Err(KstError::TooFewFunctions { functions: m, degree: k });
        }
        let spans = m - k;
        let hi = DIM as f64;
        let mut knots = vec![0.0; k];
        knots.extend((0..=spans).map(|i| hi * i as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(hi, k));
        Ok(Self { inner, n, k, knots })
    }

    pub fn len(&self) -> usize {
        self.n * DIM
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All univariate B-spline values at `t` (clamped to `[0, DIM]`).
    pub fn bspline_all(&self, t: f64) -> Vec<f64> {
        let m = self.len();
        let k = self.k;
        let kn = &self.knots;
        let t = t.clamp(0.0, DIM as f64);
        // span index mu with kn[mu] <= t < kn[mu+1], last span closed
        let mu = kn[..m].partition_point(|&v| v <= t).clamp(k + 1, m) - 1;
        // de Boor's triangular recurrence for the k+1 nonzero values
        let mut b = vec![0.0; k + 1];
        b[0] = 1.0;
        for j in 1..=k {
            let mut saved = 0.0;
            for r in 0..j {
                let left = kn[mu + 1 + r];
                let right = kn[mu + 1 + r - j];
                let w = b[r] / (left - right);
                b[r] = saved + (left - t) * w;
                saved = (t - right) * w;
            }
            b[j] = saved;
        }
        let mut out = vec![0.0; m];
        for (r, v) in b.into_iter().enumerate() {
            out[mu - k + r] = v;
        }
        out
    }

    /// `KB_{n,i}` for every `i` at `x`.
    pub fn eval_all(&self, x: Point2) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for q in 0..NQ {
            for (o, v) in out.iter_mut().zip(self.bspline_all(self.inner.inner_sum(q, x))) {
                *o += v;
            }
        }
        out
    }
}

pub fn kb_eval(basis: &KBBasis, i: usize, x: Point2) -> Result<f64, KstError> {
    if i >= basis.len() {
        return Err(KstError::Index {
            index: i,
            size: basis.len(),
        });
    }
    check_unit(x)?;
    Ok(basis.eval_all(x)[i])
}

/// The smoothing space `S^2_8` on the 32-triangle square.
pub fn lkb_space() -> SplineSpace {
    SplineSpace::new(square_grid(4), 8, 2).expect("valid space")
}

/// Penalized least-squares smoothings of the KB functions, all in one
/// spline space.
#[derive(Clone, Debug)]
pub struct LKBBasis {
    pub kb: KBBasis,
    pub space: SplineSpace,
    /// One coefficient vector per KB function.
    pub coeffs: Vec<Vec<f64>>,
    pub grid_n: usize,
    pub lambda: f64,
}

impl LKBBasis {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn spline(&self, i: usize) -> Spline {
        Spline::new(self.space.clone(), self.coeffs[i].clone())
    }

    /// Writes `basis.txt` (key=value settings) and one `lkb_NNNN.csv`
    /// coefficient file per function into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), KstError> {
        std::fs::create_dir_all(dir)?;
        let inner = &self.kb.inner;
        let mut s = String::new();
        let _ = writeln!(s, "n={}", self.kb.n);
        let _ = writeln!(s, "k={}", self.kb.k);
        let _ = writeln!(s, "resolution={}", inner.resolution);
        let _ = writeln!(s, "step={}", fmt_real(inner.step));
        let _ = writeln!(s, "lambda1={}", fmt_real(inner.lambda[0]));
        let _ = writeln!(s, "lambda2={}", fmt_real(inner.lambda[1]));
        let _ = writeln!(s, "grid_n={}", self.grid_n);
        let _ = writeln!(s, "smoothing_lambda={}", fmt_real(self.lambda));
        std::fs::write(dir.join("basis.txt"), s)?;
        for i in 0..self.len() {
            self.spline(i).save_coeffs(&dir.join(format!("lkb_{i:04}.csv")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, KstError> {
        let text = std::fs::read_to_string(dir.join("basis.txt"))?;
        let map: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        fn get<T: std::str::FromStr>(map: &HashMap<&str, &str>, key: &str) -> Result<T, KstError> {
            map.get(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| KstError::Basis(format!("missing or invalid `{key}`")))
        }
        let inner = InnerFunctions::with_step(
            get(&map, "resolution")?,
            [get(&map, "lambda1")?, get(&map, "lambda2")?],
            get(&map, "step")?,
        )?;
        let kb = KBBasis::new(inner, get(&map, "n")?, get(&map, "k")?)?;
        let space = lkb_space();
        let coeffs = (0..kb.len())
            .map(|i| Ok(Spline::load_coeffs(space.clone(), &dir.join(format!("lkb_{i:04}.csv")))?.c))
            .collect::<Result<Vec<_>, KstError>>()?;
        Ok(Self {
            kb,
            space,
            coeffs,
            grid_n: get(&map, "grid_n")?,
            lambda: get(&map, "smoothing_lambda")?,
        })
    }
}

/// KB samples on the `grid_n x grid_n` grid of the unit square, one vector
/// per basis function.
pub fn kb_samples(kb: &KBBasis, grid_n: usize) -> (Vec<Point2>, Vec<Vec<f64>>) {
    let pts = grid_points(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), grid_n);
    let rows: Vec<Vec<f64>> = pts.par_iter().map(|&p| kb.eval_all(p)).collect();
    let cols = (0..kb.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    (pts, cols)
}

/// Smooths every KB function with one shared factorization.
pub fn lkb_build(kb: &KBBasis, grid_n: usize, lambda: f64, cfg: &LsqConfig) -> Result<LKBBasis, KstError> {
    let space = lkb_space();
    let (pts, cols) = kb_samples(kb, grid_n);
    let fitter = PenalizedFitter::new(&space, &pts, lambda, cfg)?;
    let coeffs = fitter.fit_many(&cols)?;
    Ok(LKBBasis {
        kb: kb.clone(),
        space,
        coeffs,
        grid_n,
        lambda,
    })
}

#[derive(Clone, Debug)]
pub struct DlsFit {
    /// Weights of the LKB functions.
    pub weights: Vec<f64>,
    /// Combined spline `sum_i w_i LKB_i`.
    pub spline: Spline,
    pub rmse_train: f64,
    pub rmse_test: f64,
    pub rank_deficient: bool,
}

pub const DLS_TRAIN_N: usize = 101;
pub const DLS_TEST_N: usize = 1001;

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// Ordinary least squares of `f` sampled on the `grid_n` grid onto the LKB
/// functions; the test error uses the `test_n` grid.
pub fn dls_fit(lkb: &LKBBasis, f: fn(f64, f64) -> f64, grid_n: usize, test_n: usize) -> DlsFit {
    let pts = grid_points(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), grid_n);
    let z: Vec<f64> = pts.iter().map(|p| f(p.x, p.y)).collect();
    let interp = interpolation_matrix(&lkb.space, &pts, &z).expect("grid lies in the unit square");
    let m = lkb.len();
    // Phi = I C, one column per LKB function
    let cols: Vec<Vec<f64>> = lkb.coeffs.par_iter().map(|c| interp.matrix.mul_vec(c)).collect();
    let phi = Mat::<f64>::from_fn(pts.len(), m, |i, j| cols[j][i]);
    let fac = LeastSquaresFactor::new(phi.as_ref(), 1e-12);
    let w = fac.solve_vec(&z);
    let nc = lkb.space.num_coeffs();
    let mut c = vec![0.0; nc];
    for (wi, ci) in w.iter().zip(&lkb.coeffs) {
        for (a, b) in c.iter_mut().zip(ci) {
            *a += wi * b;
        }
    }
    let spline = Spline::new(lkb.space.clone(), c);
    let fit_train = interp.matrix.mul_vec(&spline.c);
    let test = grid_points(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), test_n);
    let fit_test = spline.eval_many(&test);
    let truth: Vec<f64> = test.iter().map(|p| f(p.x, p.y)).collect();
    DlsFit {
        weights: w,
        rmse_train: rmse(&fit_train, &z),
        rmse_test: rmse(&fit_test, &truth),
        spline,
        rank_deficient: fac.is_rank_deficient(),
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkTable {
    pub sizes: Vec<usize>,
    /// `(function name, rmse_test per size)`.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl BenchmarkTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("function");
        for n in &self.sizes {
            let _ = write!(s, ",n={n}");
        }
        s.push('\n');
        for (name, v) in &self.rows {
            s.push_str(name);
            for x in v {
                s.push(',');
                s.push_str(&fmt_real(*x));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub resolution: usize,
    pub step: f64,
    pub lambda_inner: [f64; DIM],
    pub k: usize,
    pub smoothing_lambda: f64,
    pub train_n: usize,
    pub test_n: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            step: DEFAULT_STEP,
            lambda_inner: DEFAULT_LAMBDA,
            k: 3,
            smoothing_lambda: 1.0,
            train_n: DLS_TRAIN_N,
            test_n: DLS_TEST_N,
        }
    }
}

/// Test RMSE of every function for every basis size `n` (`2n` LKB
/// functions).
pub fn benchmark_suite(
    functions: &[TestFunction],
    sizes: &[usize],
    cfg: &BenchmarkConfig,
    lsq: &LsqConfig,
) -> Result<BenchmarkTable, KstError> {
    let inner = InnerFunctions::with_step(cfg.resolution, cfg.lambda_inner, cfg.step)?;
    let mut per_size = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let kb = KBBasis::new(inner.clone(), n, cfg.k)?;
        let lkb = lkb_build(&kb, cfg.train_n, cfg.smoothing_lambda, lsq)?;
        let errs: Vec<f64> = functions
            .iter()
            .map(|tf| dls_fit(&lkb, tf.f, cfg.train_n, cfg.test_n).rmse_test)
            .collect();
        per_size.push(errs);
    }
    Ok(BenchmarkTable {
        sizes: sizes.to_vec(),
        rows: functions
            .iter()
            .enumerate()
            .map(|(i, tf)| (tf.name.to_string(), per_size.iter().map(|e| e[i]).collect()))
            .collect(),
    })
}
