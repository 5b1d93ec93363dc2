//! Scattered-data fitting with splines: penalized least squares,
//! minimal-energy interpolation, level-set curves, contours and grid
//! sampling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use thiserror::Error;

use crate::bform::multi_indices;
use crate::constraints::{interpolation_matrix, smoothness_matrix, ConstraintError, SplineSpace};
use crate::lsq::{energy_matrix, finish, LsqConfig, LsqError, ObjectiveTerm, PreparedSolve, QuadraticProgram, SolveReport};
use crate::mesh::Point2;

/// `||H c||_inf` at or below this certifies a spline as smooth.
pub const CERTIFY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Lsq(#[from] LsqError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("no data points")]
    NoData,
    #[error("lambda must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("coefficient file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A spline in `S^r_d` given by its global coefficient vector.
#[derive(Clone, Debug)]
pub struct Spline {
    pub space: SplineSpace,
    pub c: Vec<f64>,
    /// Whether `||H c||_inf <= CERTIFY_TOL`.
    pub certified: bool,
}

impl Spline {
    pub fn new(space: SplineSpace, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), space.num_coeffs());
        let certified = smoothness_matrix(&space).violation(&c) <= CERTIFY_TOL;
        Self { space, c, certified }
    }

    pub fn smoothness_residual(&self) -> f64 {
        smoothness_matrix(&self.space).violation(&self.c)
    }

    pub fn eval(&self, p: Point2) -> Option<f64> {
        self.space.eval(&self.c, p)
    }

    pub fn eval_partial(&self, p: Point2, px: usize, py: usize) -> Option<f64> {
        self.space.eval_partial(&self.c, p, px, py)
    }

    /// Values at many points (NaN outside the mesh), in input order.
    pub fn eval_many(&self, pts: &[Point2]) -> Vec<f64> {
        pts.par_iter()
            .map(|&p| self.eval(p).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn energy(&self) -> f64 {
        energy_matrix(&self.space).value(&self.c)
    }

    /// CSV with header `tri,a1,a2,a3,coef`, canonical order per triangle.
    pub fn coeffs_csv(&self) -> String {
        let d = self.space.degree();
        let idx = multi_indices(d);
        let mut s = String::from("tri,a1,a2,a3,coef\n");
        for t in 0..self.space.mesh().num_triangles() {
            for (a, c) in idx.iter().zip(self.space.local(&self.c, t)) {
                let _ = writeln!(s, "{t},{},{},{},{c:.16e}", a[0], a[1], a[2]);
            }
        }
        s
    }

    pub fn save_coeffs(&self, path: &Path) -> Result<(), FitError> {
        fs::write(path, self.coeffs_csv())?;
        Ok(())
    }

    pub fn parse_coeffs(space: SplineSpace, text: &str) -> Result<Self, FitError> {
        let n = space.num_coeffs();
        let nb = space.block_size();
        let idx = multi_indices(space.degree());
        let mut c = vec![f64::NAN; n];
        let bad = |line: usize, msg: &str| FitError::Parse {
            line,
            msg: msg.to_string(),
        };
        for (k, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad(k + 1, "expected 5 fields"));
            }
            let ints: Vec<usize> = f[..4]
                .iter()
                .map(|x| x.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(k + 1, &e.to_string()))?;
            let v: f64 = f[4].parse().map_err(|_| bad(k + 1, "bad coefficient"))?;
            let a = [ints[1], ints[2], ints[3]];
            let pos = idx
                .iter()
                .position(|x| *x == a)
                .ok_or_else(|| bad(k + 1, "multi-index does not match the degree"))?;
            if ints[0] * nb >= n {
                return Err(bad(k + 1, "triangle index out of range"));
            }
            c[ints[0] * nb + pos] = v;
        }
        if c.iter().any(|v| v.is_nan()) {
            return Err(bad(0, "missing coefficients"));
        }
        Ok(Self::new(space, c))
    }

    pub fn load_coeffs(space: SplineSpace, path: &Path) -> Result<Self, FitError> {
        Self::parse_coeffs(space, &fs::read_to_string(path)?)
    }
}

fn check_lambda(lambda: f64) -> Result<(), FitError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(FitError::BadLambda(lambda))
    }
}

fn penalized_program(
    space: &SplineSpace,
    points: &[Point2],
    values: &[f64],
    lambda: f64,
) -> Result<QuadraticProgram, FitError> {
    if points.is_empty() {
        return Err(FitError::NoData);
    }
    check_lambda(lambda)?;
    let data = interpolation_matrix(space, points, values)?;
    let mut qp = QuadraticProgram::new(space.num_coeffs());
    qp.block_size = Some(space.block_size());
    qp.terms.push(ObjectiveTerm {
        matrix: data.matrix,
        rhs: data.rhs,
        weight: 1.0,
    });
    if lambda > 0.0 {
        qp.energy = Some((energy_matrix(space), lambda));
    }
    qp.equalities.push(smoothness_matrix(space));
    Ok(qp)
}

/// `min sum |s(p_i) - z_i|^2 + lambda E2(s)` over `S^r_d`.
pub fn fit_penalized(
    space: &SplineSpace,
    points: &[Point2],
    values: &[f64],
    lambda: f64,
    cfg: &LsqConfig,
) -> Result<(Spline, SolveReport), FitError> {
    let qp = penalized_program(space, points, values, lambda)?;
    let rep = qp.solve(cfg)?;
    Ok((Spline::new(space.clone(), rep.c.clone()), rep))
}

/// Penalized fit with fixed sites and `lambda`, factored once and reused
/// for any number of data vectors.
pub struct PenalizedFitter {
    space: SplineSpace,
    qp: QuadraticProgram,
    prepared: PreparedSolve,
    cfg: LsqConfig,
    nobj: usize,
    npoints: usize,
}

impl PenalizedFitter {
    pub fn new(space: &SplineSpace, points: &[Point2], lambda: f64, cfg: &LsqConfig) -> Result<Self, FitError> {
        let zeros = vec![0.0; points.len()];
        let qp = penalized_program(space, points, &zeros, lambda)?;
        let prepared = qp.prepare(cfg)?;
        let nobj = qp.stacked_objective().0.nrows();
        Ok(Self {
            space: space.clone(),
            qp,
            prepared,
            cfg: cfg.clone(),
            nobj,
            npoints: points.len(),
        })
    }

    pub fn num_points(&self) -> usize {
        self.npoints
    }

    /// Coefficients for each data vector (columns of the result).
    pub fn fit_many(&self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FitError> {
        let k = values.len();
        let f = Mat::<f64>::from_fn(self.nobj, k, |i, j| if i < self.npoints { values[j][i] } else { 0.0 });
        let g = Mat::<f64>::zeros(self.qp.stacked_constraints().0.nrows(), 1);
        let (c, _, viol) = self.prepared.solve_many(&f, &g);
        if let Some(&v) = viol.iter().find(|&&v| v > self.cfg.infeasible_tol) {
            return Err(LsqError::Infeasible {
                violation: v,
                iterations: self.cfg.max_outer,
            }
            .into());
        }
        Ok((0..k)
            .map(|j| (0..self.space.num_coeffs()).map(|i| c[(i, j)]).collect())
            .collect())
    }

    pub fn fit(&self, values: &[f64]) -> Result<(Spline, SolveReport), FitError> {
        let f = Mat::<f64>::from_fn(self.nobj, 1, |i, _| if i < self.npoints { values[i] } else { 0.0 });
        let g = Mat::<f64>::zeros(self.qp.stacked_constraints().0.nrows(), 1);
        let (c, iters, _) = self.prepared.solve_many(&f, &g);
        let c: Vec<f64> = (0..self.space.num_coeffs()).map(|i| c[(i, 0)]).collect();
        let mut qp = self.qp.clone();
        qp.terms[0].rhs = values.to_vec();
        let rep = finish(qp.report(c, iters, self.prepared.rank_deficient()), &self.cfg)?;
        Ok((Spline::new(self.space.clone(), rep.c.clone()), rep))
    }
}

/// `min E2(s)` subject to `s(p_i) = z_i` and `H c = 0`.
pub fn interpolate_min_energy(
    space: &SplineSpace,
    points: &[Point2],
    values: &[f64],
    cfg: &LsqConfig,
) -> Result<(Spline, SolveReport), FitError> {
    if points.is_empty() {
        return Err(FitError::NoData);
    }
    let mut qp = QuadraticProgram::new(space.num_coeffs());
    qp.block_size = Some(space.block_size());
    qp.energy = Some((energy_matrix(space), 1.0));
    qp.equalities.push(smoothness_matrix(space));
    qp.equalities.push(interpolation_matrix(space, points, values)?);
    let rep = qp.solve(cfg)?;
    Ok((Spline::new(space.clone(), rep.c.clone()), rep))
}

/// Default energy weight for level-set fits.
pub const LEVELSET_LAMBDA: f64 = 1e-3;

/// Curve reconstruction data: the curve cloud (target 1), the outer
/// boundary (target 0) and hole boundaries (target 2).
#[derive(Clone, Debug)]
pub struct LevelSetProblem {
    pub cloud: Vec<Point2>,
    pub outer: Vec<Point2>,
    pub holes: Vec<Point2>,
    pub lambda: f64,
}

impl LevelSetProblem {
    /// `n_cloud` points on the circle and `n_boundary` points on each side of
    /// the box `[lo, hi]`.
    pub fn circle(center: Point2, radius: f64, n_cloud: usize, lo: Point2, hi: Point2, n_boundary: usize) -> Self {
        let cloud = (0..n_cloud)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n_cloud as f64;
                Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin())
            })
            .collect();
        let mut outer = Vec::with_capacity(4 * n_boundary);
        for i in 0..n_boundary {
            let s = i as f64 / n_boundary as f64;
            let (x, y) = (lo.x + s * (hi.x - lo.x), lo.y + s * (hi.y - lo.y));
            let (xr, yr) = (hi.x - s * (hi.x - lo.x), hi.y - s * (hi.y - lo.y));
            outer.extend([Point2::new(x, lo.y), Point2::new(hi.x, y), Point2::new(xr, hi.y), Point2::new(lo.x, yr)]);
        }
        Self {
            cloud,
            outer,
            holes: Vec::new(),
            lambda: LEVELSET_LAMBDA,
        }
    }

    pub fn points_and_targets(&self) -> (Vec<Point2>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.cloud.len() + self.outer.len() + self.holes.len());
        let mut z = Vec::with_capacity(pts.capacity());
        for (set, target) in [(&self.cloud, 1.0), (&self.outer, 0.0), (&self.holes, 2.0)] {
            pts.extend_from_slice(set);
            z.extend(std::iter::repeat_n(target, set.len()));
        }
        (pts, z)
    }
}

/// Penalized fit to the three target sets; the curve is the level-1 set.
pub fn solve_levelset(
    problem: &LevelSetProblem,
    space: &SplineSpace,
    cfg: &LsqConfig,
) -> Result<(Spline, SolveReport), FitError> {
    if problem.cloud.is_empty() || problem.outer.is_empty() {
        return Err(FitError::NoData);
    }
    let (pts, z) = problem.points_and_targets();
    fit_penalized(space, &pts, &z, problem.lambda, cfg)
}

/// Uniform samples over the mesh bounding box; `NaN` outside the mesh.
#[derive(Clone, Debug)]
pub struct Grid {
    pub n: usize,
    pub lo: Point2,
    pub hi: Point2,
    /// `values[j * n + i]` at `(x_i, y_j)`.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn point(&self, i: usize, j: usize) -> Point2 {
        let m = (self.n - 1) as f64;
        Point2::new(
            self.lo.x + (self.hi.x - self.lo.x) * i as f64 / m,
            self.lo.y + (self.hi.y - self.lo.y) * j as f64 / m,
        )
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    /// One row per `y_j`, `n` comma-separated values, `NaN` outside.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for j in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|i| fmt_real(self.at(i, j))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits, `NaN` spelled out.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn grid_points(lo: Point2, hi: Point2, n: usize) -> Vec<Point2> {
    let m = (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / m,
                lo.y + (hi.y - lo.y) * j as f64 / m,
            ));
        }
    }
    out
}

pub fn sample_grid(s: &Spline, grid_n: usize) -> Grid {
    assert!(grid_n >= 2, "grid needs at least 2 points per side");
    let (lo, hi) = s.space.mesh().bbox();
    let values = s.eval_many(&grid_points(lo, hi, grid_n));
    Grid {
        n: grid_n,
        lo,
        hi,
        values,
    }
}

/// Grid edge carrying a crossing: `(i, j, vertical)`; horizontal edges run
/// from `(i, j)` to `(i+1, j)`, vertical ones from `(i, j)` to `(i, j+1)`.
type EdgeKey = (usize, usize, bool);

/// Marching squares on `grid`. Cells with a `NaN` corner are skipped.
/// Polylines keep values above `level` on their left; closed curves repeat
/// their first point at the end.
pub fn contour_grid(grid: &Grid, level: f64) -> Vec<Vec<Point2>> {
    let n = grid.n;
    let above = |i: usize, j: usize| grid.at(i, j) > level;
    let crossing = |k: EdgeKey| -> Point2 {
        let (i, j, vert) = k;
        let (i2, j2) = if vert { (i, j + 1) } else { (i + 1, j) };
        let (fa, fb) = (grid.at(i, j), grid.at(i2, j2));
        let t = (level - fa) / (fb - fa);
        let (pa, pb) = (grid.point(i, j), grid.point(i2, j2));
        pa + t * (pb - pa)
    };
    // segments start -> end in cell order
    let mut next: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    let mut starts: Vec<EdgeKey> = Vec::new();
    let mut has_incoming: HashMap<EdgeKey, ()> = HashMap::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            if corners.iter().any(|&(a, b)| grid.at(a, b).is_nan()) {
                continue;
            }
            // cell edges counter-clockwise
            let edges: [EdgeKey; 4] = [(i, j, false), (i + 1, j, true), (i, j + 1, false), (i, j, true)];
            let up: Vec<bool> = corners.iter().map(|&(a, b)| above(a, b)).collect();
            let mut outs = Vec::new();
            let mut ins = Vec::new();
            for k in 0..4 {
                let (a, b) = (up[k], up[(k + 1) % 4]);
                if a && !b {
                    outs.push(k);
                } else if !a && b {
                    ins.push(k);
                }
            }
            let pairs: Vec<(usize, usize)> = match outs.len() {
                0 => Vec::new(),
                1 => vec![(outs[0], ins[0])],
                _ => {
                    let center = corners.iter().map(|&(a, b)| grid.at(a, b)).sum::<f64>() / 4.0;
                    if center > level {
                        outs.iter().map(|&k| (k, (k + 1) % 4)).collect()
                    } else {
                        outs.iter().map(|&k| (k, (k + 3) % 4)).collect()
                    }
                }
            };
            for (a, b) in pairs {
                next.insert(edges[a], edges[b]);
                has_incoming.insert(edges[b], ());
                starts.push(edges[a]);
            }
        }
    }
    let mut used: HashMap<EdgeKey, ()> = HashMap::new();
    let mut out = Vec::new();
    let trace = |start: EdgeKey, used: &mut HashMap<EdgeKey, ()>| {
        let mut line = vec![crossing(start)];
        let mut cur = start;
        while let Some(&nx) = next.get(&cur) {
            if used.insert(cur, ()).is_some() {
                break;
            }
            line.push(crossing(nx));
            cur = nx;
            if cur == start {
                break;
            }
        }
        line
    };
    // open curves first (those starting at the grid or mesh border)
    for &s in &starts {
        if !has_incoming.contains_key(&s) && !used.contains_key(&s) {
            out.push(trace(s, &mut used));
        }
    }
    for &s in &starts {
        if !used.contains_key(&s) {
            out.push(trace(s, &mut used));
        }
    }
    out
}

pub fn extract_contour(s: &Spline, level: f64, grid_n: usize) -> Vec<Vec<Point2>> {
    assert!(grid_n >= 2, "grid needs at least 2 points per side");
    contour_grid(&sample_grid(s, grid_n), level)
}

/// `curve_id,x,y` rows.
pub fn contours_csv(curves: &[Vec<Point2>]) -> String {
    let mut s = String::from("curve_id,x,y\n");
    for (k, c) in curves.iter().enumerate() {
        for p in c {
            let _ = writeln!(s, "{k},{},{}", fmt_real(p.x), fmt_real(p.y));
        }
    }
    s
}
