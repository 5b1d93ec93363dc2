//! Spline spaces and the linear constraint blocks acting on their global
//! coefficient vectors: smoothness `H`, interpolation `I`, boundary `B`.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::bform::{
    self, eval_basis_row, eval_partial, index_of_multi, multi_indices, ncoef, Bary, BformError,
    TriGeom,
};
use crate::mesh::{build_edge_table, EdgeTable, Point2, Triangulation};
use crate::sparse::{SparseBuilder, SparseMatrix};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("smoothness r = {r} is not allowed for degree d = {d}")]
    BadSmoothness { d: usize, r: i32 },
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error(transparent)]
    Bform(#[from] BformError),
    #[error("point ({x}, {y}) lies outside the triangulation")]
    Outside { x: f64, y: f64 },
    #[error("{points} points but {values} values")]
    Length { points: usize, values: usize },
    #[error("samples per edge must be at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLabel {
    Smoothness,
    Interp,
    Boundary,
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockLabel::Smoothness => "SMOOTHNESS",
            BlockLabel::Interp => "INTERP",
            BlockLabel::Boundary => "BOUNDARY",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintBlock {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub label: BlockLabel,
}

impl ConstraintBlock {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max_i |(C c - g)_i|`.
    pub fn violation(&self, c: &[f64]) -> f64 {
        self.matrix
            .mul_vec(c)
            .iter()
            .zip(&self.rhs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `S^r_d` over a triangulation.
#[derive(Clone, Debug)]
pub struct SplineSpace {
    tri: Triangulation,
    edges: EdgeTable,
    geoms: Vec<TriGeom>,
    d: usize,
    r: i32,
}

impl SplineSpace {
    pub fn new(tri: Triangulation, d: usize, r: i32) -> Result<Self, ConstraintError> {
        if d == 0 {
            return Err(ConstraintError::ZeroDegree);
        }
        bform::validate_degree(d)?;
        if r < -1 || r > d as i32 {
            return Err(ConstraintError::BadSmoothness { d, r });
        }
        let edges = build_edge_table(&tri);
        let geoms = (0..tri.num_triangles())
            .map(|t| TriGeom::new(tri.triangle_points(t)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            tri,
            edges,
            geoms,
            d,
            r,
        })
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.tri
    }

    pub fn edges(&self) -> &EdgeTable {
        &self.edges
    }

    pub fn geom(&self, t: usize) -> &TriGeom {
        &self.geoms[t]
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn smoothness(&self) -> i32 {
        self.r
    }

    pub fn block_size(&self) -> usize {
        ncoef(self.d)
    }

    pub fn num_coeffs(&self) -> usize {
        self.tri.num_triangles() * self.block_size()
    }

    pub fn local<'a>(&self, c: &'a [f64], t: usize) -> &'a [f64] {
        let n = self.block_size();
        &c[t * n..(t + 1) * n]
    }

    /// Value of the piecewise polynomial at `p`, `None` outside.
    pub fn eval(&self, c: &[f64], p: Point2) -> Option<f64> {
        let (t, b) = self.tri.locate(p)?;
        Some(bform::eval_bform(self.d, self.local(c, t), &b))
    }

    pub fn eval_partial(&self, c: &[f64], p: Point2, px: usize, py: usize) -> Option<f64> {
        let (t, b) = self.tri.locate(p)?;
        Some(eval_partial(self.d, self.local(c, t), &self.geoms[t], &b, px, py))
    }

    /// Column (local index) in triangle `t` of the coefficient whose
    /// exponents are given per mesh vertex.
    fn local_index(&self, t: usize, exps: [(usize, usize); 3]) -> usize {
        let tv = self.tri.triangles()[t];
        let mut a = [0usize; 3];
        for (v, e) in exps {
            let pos = tv.iter().position(|&w| w == v).expect("vertex of triangle");
            a[pos] += e;
        }
        index_of_multi(a)
    }

    /// Coefficients of the global polynomial `p` (given by its values)
    /// on each triangle, obtained by interpolation at the domain points.
    pub fn coeffs_of(&self, f: impl Fn(Point2) -> f64 + Sync) -> Vec<f64> {
        let d = self.d;
        let n = ncoef(d);
        // The interpolation matrix at the domain points depends only on d
        // (barycentric coordinates of domain points are fixed).
        let idx = multi_indices(d);
        let a = faer::Mat::<f64>::from_fn(n, n, |i, j| {
            let b = Bary(idx[i].map(|x| x as f64 / d as f64));
            eval_basis_row(d, &b)[j]
        });
        let lu = a.partial_piv_lu();
        let mut out = Vec::with_capacity(self.num_coeffs());
        for t in 0..self.tri.num_triangles() {
            let v = self.tri.triangle_points(t);
            let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| {
                let b = idx[i].map(|x| x as f64 / d as f64);
                f(b[0] * v[0] + b[1] * v[1] + b[2] * v[2])
            });
            let x = faer::linalg::solvers::Solve::solve(&lu, &rhs);
            out.extend((0..n).map(|i| x[(i, 0)]));
        }
        out
    }
}

/// Smoothness conditions across all interior edges, rows ordered by
/// (edge, n, condition).
pub fn smoothness_matrix(space: &SplineSpace) -> ConstraintBlock {
    let ncols = space.num_coeffs();
    if space.r < 0 {
        return ConstraintBlock {
            matrix: SparseMatrix::zeros(0, ncols),
            rhs: Vec::new(),
            label: BlockLabel::Smoothness,
        };
    }
    let r = space.r as usize;
    let d = space.d;
    let nb = space.block_size();
    let interior: Vec<usize> = (0..space.edges.edges.len())
        .filter(|&e| space.edges.edges[e].is_interior())
        .collect();
    let per_edge: Vec<Vec<Vec<(usize, f64)>>> = interior
        .par_iter()
        .map(|&e| {
            let edge = &space.edges.edges[e];
            let t = edge.left;
            let tt = edge.right.expect("interior edge");
            let (v2, v3) = (edge.a, edge.b);
            let opp = |tri: usize| {
                *space.tri.triangles()[tri]
                    .iter()
                    .find(|&&w| w != v2 && w != v3)
                    .unwrap()
            };
            let v1 = opp(t);
            let v4 = opp(tt);
            let pts = space.tri.vertices();
            let beta = bform::barycentric(&[pts[v1], pts[v2], pts[v3]], pts[v4])
                .expect("non-degenerate triangle");
            let mut rows = Vec::new();
            for n in 0..=r {
                let bern = eval_basis_row(n, &beta);
                let nus = multi_indices(n);
                for k in (0..=d - n).rev() {
                    let j = d - n - k;
                    let mut row = Vec::with_capacity(nus.len() + 1);
                    for (nu, &w) in nus.iter().zip(&bern) {
                        if w == 0.0 {
                            continue;
                        }
                        let li = space.local_index(t, [(v1, nu[0]), (v2, nu[1] + k), (v3, nu[2] + j)]);
                        row.push((t * nb + li, w));
                    }
                    let li = space.local_index(tt, [(v4, n), (v2, k), (v3, j)]);
                    row.push((tt * nb + li, -1.0));
                    rows.push(row);
                }
            }
            rows
        })
        .collect();
    let mut b = SparseBuilder::new(ncols);
    for rows in per_edge {
        for row in rows {
            b.push_row(row);
        }
    }
    let matrix = b.build();
    let rhs = vec![0.0; matrix.nrows()];
    ConstraintBlock {
        matrix,
        rhs,
        label: BlockLabel::Smoothness,
    }
}

/// Rows evaluating the spline at `points`, each placed in the block of the
/// triangle returned by `locate`.
pub fn interpolation_matrix(
    space: &SplineSpace,
    points: &[Point2],
    values: &[f64],
) -> Result<ConstraintBlock, ConstraintError> {
    if points.len() != values.len() {
        return Err(ConstraintError::Length {
            points: points.len(),
            values: values.len(),
        });
    }
    let mut b = SparseBuilder::new(space.num_coeffs());
    let nb = space.block_size();
    for &p in points {
        let (t, bary) = space
            .tri
            .locate(p)
            .ok_or(ConstraintError::Outside { x: p.x, y: p.y })?;
        let row = eval_basis_row(space.d, &bary);
        b.push_row(row.into_iter().enumerate().filter(|(_, v)| *v != 0.0).map(|(i, v)| (t * nb + i, v)));
    }
    Ok(ConstraintBlock {
        matrix: b.build(),
        rhs: values.to_vec(),
        label: BlockLabel::Interp,
    })
}

/// Equally spaced sample points on every boundary edge (endpoints included),
/// deduplicated at shared vertices. Each point is paired with the boundary
/// triangle and its barycentric coordinates there.
pub fn boundary_samples(space: &SplineSpace, samples_per_edge: usize) -> Vec<(Point2, usize, Bary)> {
    let mut seen_vertex = vec![false; space.tri.num_vertices()];
    let mut out = Vec::new();
    let pts = space.tri.vertices();
    let m = samples_per_edge - 1;
    for e in space.edges.edges.iter().filter(|e| !e.is_interior()) {
        let t = e.left;
        let tv = space.tri.triangles()[t];
        let ia = tv.iter().position(|&w| w == e.a).unwrap();
        let ib = tv.iter().position(|&w| w == e.b).unwrap();
        for s in 0..=m {
            let vertex = if s == 0 {
                Some(e.a)
            } else if s == m {
                Some(e.b)
            } else {
                None
            };
            if let Some(v) = vertex {
                if seen_vertex[v] {
                    continue;
                }
                seen_vertex[v] = true;
            }
            let u = s as f64 / m as f64;
            let mut bary = [0.0; 3];
            bary[ia] = 1.0 - u;
            bary[ib] = u;
            let p = (1.0 - u) * pts[e.a] + u * pts[e.b];
            out.push((p, t, Bary(bary)));
        }
    }
    out
}

/// Rows pinning `s = g` at `samples_per_edge` points per boundary edge.
pub fn boundary_matrix(
    space: &SplineSpace,
    g: impl Fn(Point2) -> f64,
    samples_per_edge: usize,
) -> Result<ConstraintBlock, ConstraintError> {
    if samples_per_edge < space.d + 1 {
        return Err(ConstraintError::TooFewSamples {
            min: space.d + 1,
            got: samples_per_edge,
        });
    }
    let nb = space.block_size();
    let mut b = SparseBuilder::new(space.num_coeffs());
    let mut rhs = Vec::new();
    for (p, t, bary) in boundary_samples(space, samples_per_edge) {
        let row = eval_basis_row(space.d, &bary);
        b.push_row(row.into_iter().enumerate().filter(|(_, v)| *v != 0.0).map(|(i, v)| (t * nb + i, v)));
        rhs.push(g(p));
    }
    Ok(ConstraintBlock {
        matrix: b.build(),
        rhs,
        label: BlockLabel::Boundary,
    })
}

/// Largest jump of any partial derivative of order `0..=order` across the
/// interior edges, sampled at `samples` interior points per edge.
pub fn max_jump(space: &SplineSpace, c: &[f64], order: usize, samples: usize) -> f64 {
    let d = space.d;
    let mut worst = 0.0f64;
    let pts = space.tri.vertices();
    for e in space.edges.edges.iter().filter(|e| e.is_interior()) {
        let (t1, t2) = (e.left, e.right.unwrap());
        let (g1, g2) = (&space.geoms[t1], &space.geoms[t2]);
        for s in 0..samples {
            let u = (s as f64 + 0.5) / samples as f64;
            let p = (1.0 - u) * pts[e.a] + u * pts[e.b];
            let (b1, b2) = (g1.barycentric(p), g2.barycentric(p));
            for k in 0..=order {
                for px in 0..=k {
                    let py = k - px;
                    let a = eval_partial(d, space.local(c, t1), g1, &b1, px, py);
                    let b = eval_partial(d, space.local(c, t2), g2, &b2, px, py);
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    worst
}

/// Map from a canonical (vertex, exponent) description of a domain point to
/// the triangle where it was first seen. Shared between collocation and
/// boundary bookkeeping.
pub fn domain_point_key(tv: [usize; 3], a: [usize; 3]) -> Vec<(usize, usize)> {
    let mut key: Vec<(usize, usize)> = tv.iter().copied().zip(a).filter(|(_, e)| *e > 0).collect();
    key.sort_unstable();
    key
}

/// Deduplicated domain points of degree `dp` over the whole mesh, each with
/// the lowest-index triangle containing it. Boundary points are flagged.
pub fn global_domain_points(space: &SplineSpace, dp: usize) -> Vec<(Point2, usize, Bary, bool)> {
    let mut seen: HashMap<Vec<(usize, usize)>, ()> = HashMap::new();
    let mut out = Vec::new();
    let bv = &space.edges.boundary_vertex;
    for t in 0..space.tri.num_triangles() {
        let tv = space.tri.triangles()[t];
        let v = space.tri.triangle_points(t);
        for a in multi_indices(dp) {
            let key = domain_point_key(tv, a);
            if seen.insert(key.clone(), ()).is_some() {
                continue;
            }
            let on_boundary = match key.len() {
                1 => bv[key[0].0],
                2 => space
                    .edges
                    .find(key[0].0, key[1].0)
                    .is_some_and(|e| !space.edges.edges[e].is_interior()),
                _ => false,
            };
            let b = Bary(a.map(|x| x as f64 / dp as f64));
            let p = b.0[0] * v[0] + b.0[1] * v[1] + b.0[2] * v[2];
            out.push((p, t, b, on_boundary));
        }
    }
    out
}
