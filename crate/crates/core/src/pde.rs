//! Collocation for second-order elliptic equations in non-divergence form
//!
//! ```text
//! -(a11 u_xx + 2 a12 u_xy + a22 u_yy + b1 u_x + b2 u_y + c0 u) = f   in the domain
//!                                                           u = g   on the boundary
//! ```
//!
//! The operator is applied to every basis function at the interior domain
//! points of degree `D'`, and the overdetermined system is solved in least
//! squares subject to the boundary and smoothness constraints.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::bform::{derivative_rows, multi_indices, Bary};
use crate::constraints::{boundary_matrix, domain_point_key, global_domain_points, smoothness_matrix, ConstraintError, SplineSpace};
use crate::fit::{fmt_real, grid_points, Spline};
use crate::functions::Manufactured;
use crate::lsq::{LsqConfig, LsqError, ObjectiveTerm, QuadraticProgram, SolveReport};
use crate::mesh::{Point2, Triangulation};
use crate::quadrature::{dunavant7, triangle_gauss};
use crate::sparse::{SparseBuilder, SparseMatrix};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Lsq(#[from] LsqError),
    #[error("collocation degree must be at least 1")]
    BadCollocationDegree,
    #[error("no interior collocation points")]
    NoCollocationPoints,
    #[error("convergence study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
}

pub type Coef = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;

fn constant(v: f64) -> Coef {
    Arc::new(move |_| v)
}

#[derive(Clone)]
pub struct EllipticProblem {
    pub a11: Coef,
    pub a12: Coef,
    pub a22: Coef,
    pub b1: Coef,
    pub b2: Coef,
    pub c0: Coef,
    pub f: Coef,
    pub g: Coef,
}

impl EllipticProblem {
    /// `-Δu = f`, `u = g` on the boundary.
    pub fn poisson(f: Coef, g: Coef) -> Self {
        Self {
            a11: constant(1.0),
            a12: constant(0.0),
            a22: constant(1.0),
            b1: constant(0.0),
            b2: constant(0.0),
            c0: constant(0.0),
            f,
            g,
        }
    }

    /// Poisson problem whose exact solution is `m`.
    pub fn poisson_for(m: Manufactured) -> Self {
        Self::poisson(
            Arc::new(move |p| -m.laplacian(p.x, p.y)),
            Arc::new(move |p| (m.u)(p.x, p.y)),
        )
    }

    /// The variable-coefficient test operator with `a11 = 2 + x`,
    /// `a12 = sin(x + y) / 2`, `a22 = 2 + y^2`, `b = (x, -y)`, `c0 = -1`.
    pub fn variable(f: Coef, g: Coef) -> Self {
        Self {
            a11: Arc::new(|p| 2.0 + p.x),
            a12: Arc::new(|p| 0.5 * (p.x + p.y).sin()),
            a22: Arc::new(|p| 2.0 + p.y * p.y),
            b1: Arc::new(|p| p.x),
            b2: Arc::new(|p| -p.y),
            c0: constant(-1.0),
            f,
            g,
        }
    }

    /// The variable-coefficient operator with `m` as its exact solution.
    pub fn variable_for(m: Manufactured) -> Self {
        let mut pb = Self::variable(constant(0.0), Arc::new(move |p| (m.u)(p.x, p.y)));
        let op = pb.clone();
        pb.f = Arc::new(move |p| -op.apply_exact(&m, p));
        pb
    }

    /// `a11 u_xx + 2 a12 u_xy + a22 u_yy + b1 u_x + b2 u_y + c0 u` for a known `u`.
    pub fn apply_exact(&self, m: &Manufactured, p: Point2) -> f64 {
        let (x, y) = (p.x, p.y);
        (self.a11)(p) * (m.uxx)(x, y)
            + 2.0 * (self.a12)(p) * (m.uxy)(x, y)
            + (self.a22)(p) * (m.uyy)(x, y)
            + (self.b1)(p) * (m.ux)(x, y)
            + (self.b2)(p) * (m.uy)(x, y)
            + (self.c0)(p) * (m.u)(x, y)
    }

    /// Minimum of `a11 a22 - a12^2` over `pts`.
    pub fn min_ellipticity(&self, pts: &[Point2]) -> f64 {
        pts.iter()
            .map(|&p| (self.a11)(p) * (self.a22)(p) - (self.a12)(p).powi(2))
            .fold(f64::INFINITY, f64::min)
    }

    /// Operator weights on `[xx, xy, yy, x, y, value]` at `p`.
    fn weights(&self, p: Point2) -> [f64; 6] {
        [
            (self.a11)(p),
            2.0 * (self.a12)(p),
            (self.a22)(p),
            (self.b1)(p),
            (self.b2)(p),
            (self.c0)(p),
        ]
    }
}

const ORDERS: [(usize, usize); 6] = [(2, 0), (1, 1), (0, 2), (1, 0), (0, 1), (0, 0)];

/// Operator value `L s` at `p`, `None` outside the mesh.
pub fn apply_operator(problem: &EllipticProblem, s: &Spline, p: Point2) -> Option<f64> {
    let (t, b) = s.space.mesh().locate(p)?;
    let rows = derivative_rows(s.space.degree(), s.space.geom(t), &b, &ORDERS);
    let local = s.space.local(&s.c, t);
    let w = problem.weights(p);
    Some(
        rows.iter()
            .zip(w)
            .map(|(r, wk)| wk * r.iter().zip(local).map(|(a, b)| a * b).sum::<f64>())
            .sum(),
    )
}

/// Collocation system: `K` (rows of `L B_alpha(xi_i)`), the right-hand
/// side `f(xi_i)` and the collocation points.
pub struct Collocation {
    pub k: SparseMatrix,
    pub rhs: Vec<f64>,
    pub points: Vec<Point2>,
    pub warnings: Vec<String>,
}

/// Where collocation sites on interior edges and vertices are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeSites {
    /// Once per incident triangle, so the operator is matched from every
    /// side (second derivatives may jump across edges when `r < 2`).
    #[default]
    PerTriangle,
    /// Once, in the lowest-index triangle containing the site.
    Deduplicated,
}

/// Non-boundary domain points of degree `dprime` with the triangle they
/// are evaluated in.
pub fn collocation_sites(space: &SplineSpace, dprime: usize, mode: EdgeSites) -> Vec<(Point2, usize, Bary)> {
    match mode {
        EdgeSites::Deduplicated => global_domain_points(space, dprime)
            .into_iter()
            .filter(|x| !x.3)
            .map(|(p, t, b, _)| (p, t, b))
            .collect(),
        EdgeSites::PerTriangle => {
            let et = space.edges();
            let mut out = Vec::new();
            for t in 0..space.mesh().num_triangles() {
                let tv = space.mesh().triangles()[t];
                let v = space.mesh().triangle_points(t);
                for a in multi_indices(dprime) {
                    let key = domain_point_key(tv, a);
                    let on_boundary = match key.len() {
                        1 => et.boundary_vertex[key[0].0],
                        2 => et.find(key[0].0, key[1].0).is_some_and(|e| !et.edges[e].is_interior()),
                        _ => false,
                    };
                    if on_boundary {
                        continue;
                    }
                    let b = Bary(a.map(|x| x as f64 / dprime as f64));
                    out.push((b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2], t, b));
                }
            }
            out
        }
    }
}

pub fn assemble_collocation(
    space: &SplineSpace,
    problem: &EllipticProblem,
    dprime: usize,
    mode: EdgeSites,
) -> Result<Collocation, PdeError> {
    if dprime == 0 {
        return Err(PdeError::BadCollocationDegree);
    }
    let pts = collocation_sites(space, dprime, mode);
    if pts.is_empty() {
        return Err(PdeError::NoCollocationPoints);
    }
    let d = space.degree();
    let nb = space.block_size();
    let rows: Vec<Vec<(usize, f64)>> = pts
        .par_iter()
        .map(|(p, t, b)| {
            let dr = derivative_rows(d, space.geom(*t), b, &ORDERS);
            let w = problem.weights(*p);
            (0..nb)
                .map(|j| (t * nb + j, (0..6).map(|k| w[k] * dr[k][j]).sum::<f64>()))
                .filter(|(_, v)| *v != 0.0)
                .collect()
        })
        .collect();
    let mut b = SparseBuilder::new(space.num_coeffs());
    for r in rows {
        b.push_row(r);
    }
    let points: Vec<Point2> = pts.iter().map(|x| x.0).collect();
    let mut warnings = Vec::new();
    let ell = problem.min_ellipticity(&points);
    if ell <= 0.0 {
        warnings.push(format!("operator is not elliptic at a collocation point (min a11*a22-a12^2 = {ell:.3e})"));
    }
    Ok(Collocation {
        k: b.build(),
        rhs: points.iter().map(|&p| (problem.f)(p)).collect(),
        points,
        warnings,
    })
}

/// Subdivision depth of each triangle for the residual quadrature.
const EPS1_REFINE: usize = 2;

/// `||L s + f||_{L2}` by a 7-point rule on each triangle split
/// `4^EPS1_REFINE` times. For the Poisson problem this is `||Δs + f||`.
pub fn residual_norm(problem: &EllipticProblem, s: &Spline) -> f64 {
    let space = &s.space;
    let rule = dunavant7();
    let d = space.degree();
    let sub = {
        let mut m = Triangulation::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .expect("reference triangle");
        for _ in 0..EPS1_REFINE {
            m = m.refine_uniform();
        }
        m
    };
    let per_tri: Vec<f64> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = space.geom(t);
            let local = space.local(&s.c, t);
            let v = geom.v;
            let mut acc = 0.0;
            for st in 0..sub.num_triangles() {
                let sp = sub.triangle_points(st);
                let sub_area = sub.triangle_area(st) * 2.0 * geom.area;
                for (q, w) in &rule {
                    // reference point -> barycentric in t
                    let r = q.0[0] * sp[0] + q.0[1] * sp[1] + q.0[2] * sp[2];
                    let b = Bary([1.0 - r.x - r.y, r.x, r.y]);
                    let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
                    let rows = derivative_rows(d, geom, &b, &ORDERS);
                    let wk = problem.weights(p);
                    let ls: f64 = rows
                        .iter()
                        .zip(wk)
                        .map(|(row, c)| c * row.iter().zip(local).map(|(a, b)| a * b).sum::<f64>())
                        .sum();
                    let e = ls + (problem.f)(p);
                    acc += w * sub_area * e * e;
                }
            }
            acc
        })
        .collect();
    per_tri.iter().sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct EllipticOptions {
    pub dprime: usize,
    /// Boundary samples per edge; `None` uses `d + 1`.
    pub boundary_samples: Option<usize>,
    pub edge_sites: EdgeSites,
    pub lsq: LsqConfig,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        Self {
            dprime: 0,
            boundary_samples: None,
            edge_sites: EdgeSites::PerTriangle,
            lsq: LsqConfig::default(),
        }
    }
}

/// `min ||-K c - f||^2` subject to `B c = G` and `H c = 0`.
/// A `dprime` of 0 in `opts` collocates at degree `d`.
pub fn solve_elliptic(
    space: &SplineSpace,
    problem: &EllipticProblem,
    opts: &EllipticOptions,
) -> Result<(Spline, SolveReport), PdeError> {
    let d = space.degree();
    let dprime = if opts.dprime == 0 { d } else { opts.dprime };
    let col = assemble_collocation(space, problem, dprime, opts.edge_sites)?;
    let neg_k = SparseMatrix::from_triplets(
        col.k.nrows(),
        col.k.ncols(),
        &col.k.triplets().map(|(i, j, v)| (i, j, -v)).collect::<Vec<_>>(),
    )
    .expect("same shape");
    let mut qp = QuadraticProgram::new(space.num_coeffs());
    qp.block_size = Some(space.block_size());
    qp.terms.push(ObjectiveTerm {
        matrix: neg_k,
        rhs: col.rhs,
        weight: 1.0,
    });
    let g = problem.g.clone();
    qp.equalities
        .push(boundary_matrix(space, move |p| g(p), opts.boundary_samples.unwrap_or(d + 1))?);
    qp.equalities.push(smoothness_matrix(space));
    let mut rep = qp.solve(&opts.lsq)?;
    rep.warnings.extend(col.warnings);
    let s = Spline::new(space.clone(), rep.c.clone());
    rep.epsilon1 = Some(residual_norm(problem, &s));
    Ok((s, rep))
}

/// Errors of a spline against a known solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub grad_l2: f64,
    pub rmse: f64,
    pub max: f64,
}

/// `L2` and gradient `L2` errors by a degree-`2d` rule per triangle, and
/// RMSE / max error on the in-domain points of a `grid_n x grid_n` grid
/// over the bounding box.
pub fn error_norms(s: &Spline, m: &Manufactured, grid_n: usize) -> ErrorNorms {
    let space = &s.space;
    let d = space.degree();
    let rule = triangle_gauss(2 * d);
    let sums: Vec<(f64, f64)> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = space.geom(t);
            let local = space.local(&s.c, t);
            let v = geom.v;
            let (mut e0, mut e1) = (0.0, 0.0);
            for (b, w) in &rule {
                let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
                let rows = derivative_rows(d, geom, b, &[(0, 0), (1, 0), (0, 1)]);
                let val: Vec<f64> = rows
                    .iter()
                    .map(|r| r.iter().zip(local).map(|(a, c)| a * c).sum())
                    .collect();
                let ev = val[0] - (m.u)(p.x, p.y);
                let ex = val[1] - (m.ux)(p.x, p.y);
                let ey = val[2] - (m.uy)(p.x, p.y);
                e0 += w * geom.area * ev * ev;
                e1 += w * geom.area * (ex * ex + ey * ey);
            }
            (e0, e1)
        })
        .collect();
    let l2 = sums.iter().map(|x| x.0).sum::<f64>().sqrt();
    let grad_l2 = sums.iter().map(|x| x.1).sum::<f64>().sqrt();
    let (lo, hi) = space.mesh().bbox();
    let pts = grid_points(lo, hi, grid_n);
    let vals = s.eval_many(&pts);
    let (mut sq, mut mx, mut cnt) = (0.0, 0.0f64, 0usize);
    for (p, v) in pts.iter().zip(&vals) {
        if v.is_nan() {
            continue;
        }
        let e = (v - (m.u)(p.x, p.y)).abs();
        sq += e * e;
        mx = mx.max(e);
        cnt += 1;
    }
    ErrorNorms {
        l2,
        grad_l2,
        rmse: if cnt == 0 { 0.0 } else { (sq / cnt as f64).sqrt() },
        max: mx,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub mesh_size: f64,
    pub num_triangles: usize,
    pub l2: f64,
    pub grad_l2: f64,
    pub rmse: f64,
    pub max: f64,
    pub epsilon1: f64,
}

/// Observed order of convergence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    /// Errors are at rounding level on every mesh.
    Exact,
    Slope(f64),
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Exact => f.write_str("EXACT"),
            Rate::Slope(s) => write!(f, "{}", fmt_real(*s)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub l2_rate: Rate,
    pub grad_rate: Rate,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,mesh_size,triangles,l2_error,grad_l2_error,rmse,max_error,epsilon1\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.level,
                fmt_real(r.mesh_size),
                r.num_triangles,
                fmt_real(r.l2),
                fmt_real(r.grad_l2),
                fmt_real(r.rmse),
                fmt_real(r.max),
                fmt_real(r.epsilon1)
            );
        }
        let _ = writeln!(s, "# l2_rate={}", self.l2_rate);
        let _ = writeln!(s, "# grad_rate={}", self.grad_rate);
        s
    }
}

/// Below this every level counts as exact.
pub const EXACT_TOL: f64 = 1e-10;

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_rate(h: &[f64], e: &[f64]) -> Rate {
    if e.iter().all(|&x| x < EXACT_TOL) {
        return Rate::Exact;
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Rate::Slope(sxy / sxx)
}

/// Solves on `base` and `levels - 1` uniform refinements of it.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    problem: &EllipticProblem,
    exact: &Manufactured,
    base: &Triangulation,
    d: usize,
    r: i32,
    levels: usize,
    grid_n: usize,
    opts: &EllipticOptions,
) -> Result<ConvergenceReport, PdeError> {
    if levels < 3 {
        return Err(PdeError::TooFewLevels(levels));
    }
    let mut mesh = base.clone();
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let space = SplineSpace::new(mesh.clone(), d, r)?;
        let (s, rep) = solve_elliptic(&space, problem, opts)?;
        let e = error_norms(&s, exact, grid_n);
        rows.push(ConvergenceRow {
            level,
            mesh_size: mesh.mesh_size(),
            num_triangles: mesh.num_triangles(),
            l2: e.l2,
            grad_l2: e.grad_l2,
            rmse: e.rmse,
            max: e.max,
            epsilon1: rep.epsilon1.unwrap_or(f64::NAN),
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.mesh_size).collect();
    let l2_rate = fitted_rate(&h, &rows.iter().map(|r| r.l2).collect::<Vec<_>>());
    let grad_rate = fitted_rate(&h, &rows.iter().map(|r| r.grad_l2).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        rows,
        l2_rate,
        grad_rate,
    })
}
