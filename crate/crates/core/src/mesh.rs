//! Triangulations: validation, text I/O, edge adjacency, point location,
//! uniform refinement and quality metrics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use thiserror::Error;

use crate::bform::Bary;

/// Inside-test tolerance on barycentric coordinates.
pub const LOCATE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("triangle {tri} references vertex {vertex}, but only {count} vertices exist")]
    BadIndex {
        tri: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate (repeated vertex or zero area)")]
    Degenerate(usize),
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("vertex {0} is not used by any triangle")]
    UnusedVertex(usize),
    #[error("mesh has no triangles")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Triangle on the left of the directed edge a -> b.
    pub left: usize,
    /// Triangle on the right, `None` on the boundary.
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct EdgeTable {
    pub edges: Vec<Edge>,
    /// Incident edge indices per vertex, ascending.
    pub vertex_edges: Vec<Vec<usize>>,
    /// `triangle_edges[t][i]` is the edge opposite local vertex `i` of `t`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
}

impl EdgeTable {
    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.len() - self.num_interior_edges()
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| !b).count()
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary_vertex
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| i)
    }

    pub fn find(&self, u: usize, v: usize) -> Option<usize> {
        self.vertex_edges.get(u)?.iter().copied().find(|&e| {
            let ed = &self.edges[e];
            (ed.a == u && ed.b == v) || (ed.a == v && ed.b == u)
        })
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let ed = &self.edges[e];
        if ed.a == v {
            ed.b
        } else {
            ed.a
        }
    }
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
}

impl Triangulation {
    /// Validates and builds a triangulation. Clockwise triangles are
    /// reoriented to counter-clockwise.
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        let scale = bbox_scale(&vertices);
        let mut used = vec![false; vertices.len()];
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::BadIndex {
                        tri: t,
                        vertex: v,
                        count: vertices.len(),
                    });
                }
                used[v] = true;
            }
            let [a, b, c] = *tri;
            if a == b || b == c || a == c {
                return Err(MeshError::Degenerate(t));
            }
            let o = orient(vertices[a], vertices[b], vertices[c]);
            if o.abs() <= 1e-14 * scale * scale {
                return Err(MeshError::Degenerate(t));
            }
            tris.push(if o > 0.0 { [a, b, c] } else { [a, c, b] });
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }
        check_conforming(&vertices, &tris)?;
        let mut tri = Self {
            vertices,
            triangles: tris,
            boundary_loops: Vec::new(),
        };
        let table = build_edge_table(&tri);
        tri.boundary_loops = boundary_loops(&tri, &table)?;
        Ok(tri)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Outer loop first (counter-clockwise), then hole loops (clockwise).
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * orient(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Longest edge over all triangles, |Δ|.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                a.dist(b).max(b.dist(c)).max(c.dist(a))
            })
            .fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn barycentric(&self, t: usize, p: Point2) -> Bary {
        let [a, b, c] = self.triangle_points(t);
        let det = orient(a, b, c);
        let b1 = orient(p, b, c) / det;
        let b2 = orient(a, p, c) / det;
        Bary([b1, b2, 1.0 - b1 - b2])
    }

    /// Lowest-index triangle containing `p` (all barycentric coordinates
    /// at least `-LOCATE_TOL`), or `None` for exterior points.
    pub fn locate(&self, p: Point2) -> Option<(usize, Bary)> {
        (0..self.num_triangles()).find_map(|t| {
            let b = self.barycentric(t, p);
            b.0.iter().all(|&v| v >= -LOCATE_TOL).then_some((t, b))
        })
    }

    pub fn from_bary(&self, t: usize, b: &Bary) -> Point2 {
        let [p, q, r] = self.triangle_points(t);
        b.0[0] * p + b.0[1] * q + b.0[2] * r
    }

    /// Red refinement: every triangle is split into four similar children
    /// through its edge midpoints. Midpoint of edge `e` becomes vertex `V + e`.
    pub fn refine_uniform(&self) -> Triangulation {
        let table = build_edge_table(self);
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        for e in &table.edges {
            vertices.push(0.5 * (self.vertices[e.a] + self.vertices[e.b]));
        }
        let mut tris = Vec::with_capacity(4 * self.num_triangles());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let te = table.triangle_edges[t];
            // te[i] is opposite vertex i: te[2] = ab, te[0] = bc, te[1] = ca
            let (mab, mbc, mca) = (nv + te[2], nv + te[0], nv + te[1]);
            tris.push([a, mab, mca]);
            tris.push([mab, b, mbc]);
            tris.push([mca, mbc, c]);
            tris.push([mab, mbc, mca]);
        }
        Triangulation::new(vertices, tris).expect("refinement of a valid mesh is valid")
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                (0..3)
                    .map(|i| {
                        let u = p[(i + 1) % 3] - p[i];
                        let v = p[(i + 2) % 3] - p[i];
                        u.cross(v).abs().atan2(u.dot(v))
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, msg: &str| MeshError::Parse {
            line,
            msg: msg.to_string(),
        };
        let (ln, head) = lines.next().ok_or_else(|| err(0, "empty mesh file"))?;
        let counts: Vec<usize> = head
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(ln, "expected \"V T\"")))
            .collect::<Result<_, _>>()?;
        if counts.len() != 2 {
            return Err(err(ln, "expected \"V T\""));
        }
        let (nv, nt) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of file in vertex block"))?;
            let f: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| err(ln, "bad vertex coordinate")))
                .collect::<Result<_, _>>()?;
            if f.len() != 2 {
                return Err(err(ln, "vertex line needs \"x y\""));
            }
            vertices.push(Point2::new(f[0], f[1]));
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of file in triangle block"))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| err(ln, "bad triangle index")))
                .collect::<Result<_, _>>()?;
            if f.len() != 3 {
                return Err(err(ln, "triangle line needs \"i j k\""));
            }
            triangles.push([f[0], f[1], f[2]]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing data after triangle block"));
        }
        Triangulation::new(vertices, triangles)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.num_vertices(), self.num_triangles());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p.x, p.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn load_mesh(path: &Path) -> Result<Triangulation, MeshError> {
    let text = std::fs::read_to_string(path)?;
    Triangulation::parse(&text)
}

pub fn build_edge_table(tri: &Triangulation) -> EdgeTable {
    // directed edge -> triangle
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tv) in tri.triangles.iter().enumerate() {
        for i in 0..3 {
            directed.insert((tv[(i + 1) % 3], tv[(i + 2) % 3]), t);
        }
    }
    let mut keys: Vec<(usize, usize)> = directed
        .keys()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let mut edges = Vec::with_capacity(keys.len());
    let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(keys.len());
    for (u, v) in keys {
        let fwd = directed.get(&(u, v)).copied();
        let bwd = directed.get(&(v, u)).copied();
        let e = match (fwd, bwd) {
            (Some(l), r) => Edge {
                a: u,
                b: v,
                left: l,
                right: r,
            },
            (None, Some(l)) => Edge {
                a: v,
                b: u,
                left: l,
                right: None,
            },
            (None, None) => unreachable!(),
        };
        index.insert((u, v), edges.len());
        edges.push(e);
    }

    let mut vertex_edges = vec![Vec::new(); tri.num_vertices()];
    let mut boundary_vertex = vec![false; tri.num_vertices()];
    for (i, e) in edges.iter().enumerate() {
        vertex_edges[e.a].push(i);
        vertex_edges[e.b].push(i);
        if !e.is_interior() {
            boundary_vertex[e.a] = true;
            boundary_vertex[e.b] = true;
        }
    }
    let triangle_edges = tri
        .triangles
        .iter()
        .map(|tv| {
            let mut te = [0; 3];
            for (i, slot) in te.iter_mut().enumerate() {
                let (u, v) = (tv[(i + 1) % 3], tv[(i + 2) % 3]);
                *slot = index[&(u.min(v), u.max(v))];
            }
            te
        })
        .collect();
    EdgeTable {
        edges,
        vertex_edges,
        triangle_edges,
        boundary_vertex,
    }
}

fn bbox_scale(vertices: &[Point2]) -> f64 {
    let (mut lo, mut hi) = (
        Point2::new(f64::INFINITY, f64::INFINITY),
        Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in vertices {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE)
}

fn check_conforming(vertices: &[Point2], tris: &[[usize; 3]]) -> Result<(), MeshError> {
    let scale = bbox_scale(vertices);
    let eps = 1e-12 * scale * scale;

    // Each directed edge at most once: two CCW triangles sharing an edge
    // must traverse it in opposite directions.
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tv) in tris.iter().enumerate() {
        for i in 0..3 {
            let key = (tv[i], tv[(i + 1) % 3]);
            if let Some(s) = directed.insert(key, t) {
                return Err(MeshError::NonConforming(format!(
                    "triangles {s} and {t} overlap along edge {}-{}",
                    key.0, key.1
                )));
            }
        }
    }

    let boxes: Vec<(Point2, Point2)> = tris
        .iter()
        .map(|tv| {
            let p = tv.map(|v| vertices[v]);
            (
                Point2::new(p[0].x.min(p[1].x).min(p[2].x), p[0].y.min(p[1].y).min(p[2].y)),
                Point2::new(p[0].x.max(p[1].x).max(p[2].x), p[0].y.max(p[1].y).max(p[2].y)),
            )
        })
        .collect();

    // Vertices strictly inside a triangle or in the relative interior of
    // one of its edges (hanging nodes).
    for (t, tv) in tris.iter().enumerate() {
        let (lo, hi) = boxes[t];
        let p = tv.map(|v| vertices[v]);
        for (v, &q) in vertices.iter().enumerate() {
            if tv.contains(&v) || q.x < lo.x || q.x > hi.x || q.y < lo.y || q.y > hi.y {
                continue;
            }
            let o = [
                orient(p[0], p[1], q),
                orient(p[1], p[2], q),
                orient(p[2], p[0], q),
            ];
            if o.iter().all(|&x| x > eps) {
                return Err(MeshError::NonConforming(format!(
                    "vertex {v} lies inside triangle {t}"
                )));
            }
            for i in 0..3 {
                if o[i].abs() <= eps && o[(i + 1) % 3] > eps && o[(i + 2) % 3] > eps {
                    return Err(MeshError::NonConforming(format!(
                        "vertex {v} lies on an edge of triangle {t}"
                    )));
                }
            }
        }
    }

    // Proper crossings between edges of different triangles.
    let segs: Vec<(usize, usize, usize)> = tris
        .iter()
        .enumerate()
        .flat_map(|(t, tv)| (0..3).map(move |i| (t, tv[i], tv[(i + 1) % 3])))
        .collect();
    for (i, &(t1, a, b)) in segs.iter().enumerate() {
        for &(t2, c, d) in &segs[i + 1..] {
            if t1 == t2 || a == c || a == d || b == c || b == d {
                continue;
            }
            let (pa, pb, pc, pd) = (vertices[a], vertices[b], vertices[c], vertices[d]);
            if pa.x.max(pb.x) < pc.x.min(pd.x)
                || pc.x.max(pd.x) < pa.x.min(pb.x)
                || pa.y.max(pb.y) < pc.y.min(pd.y)
                || pc.y.max(pd.y) < pa.y.min(pb.y)
            {
                continue;
            }
            let d1 = orient(pa, pb, pc);
            let d2 = orient(pa, pb, pd);
            let d3 = orient(pc, pd, pa);
            let d4 = orient(pc, pd, pb);
            if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
                && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
            {
                return Err(MeshError::NonConforming(format!(
                    "edges of triangles {t1} and {t2} cross"
                )));
            }
        }
    }
    Ok(())
}

fn boundary_loops(tri: &Triangulation, table: &EdgeTable) -> Result<Vec<Vec<usize>>, MeshError> {
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in table.edges.iter().filter(|e| !e.is_interior()) {
        next.entry(e.a).or_default().push(e.b);
    }
    for succ in next.values_mut() {
        succ.sort_unstable();
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut loops = Vec::new();
    for s in starts {
        while next.get(&s).is_some_and(|v| !v.is_empty()) {
            let mut lp = vec![s];
            let mut cur = next.get_mut(&s).unwrap().remove(0);
            while cur != s {
                lp.push(cur);
                let succ = next.get_mut(&cur).ok_or_else(|| {
                    MeshError::NonConforming(format!("open boundary at vertex {cur}"))
                })?;
                if succ.is_empty() {
                    return Err(MeshError::NonConforming(format!(
                        "open boundary at vertex {cur}"
                    )));
                }
                cur = succ.remove(0);
            }
            loops.push(lp);
        }
    }
    let signed = |lp: &Vec<usize>| -> f64 {
        (0..lp.len())
            .map(|i| {
                let p = tri.vertices[lp[i]];
                let q = tri.vertices[lp[(i + 1) % lp.len()]];
                p.cross(q)
            })
            .sum::<f64>()
    };
    // outer loop (largest positive area) first
    loops.sort_by(|a, b| signed(b).total_cmp(&signed(a)));
    Ok(loops)
}

/// `k x k` grid of squares on [0,1]^2, each split by its (0,0)-(1,1) diagonal.
/// Vertex `(i, j)` has index `j * (k + 1) + i`.
pub fn square_grid(k: usize) -> Triangulation {
    rect_grid(k, k, Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
}

pub fn rect_grid(nx: usize, ny: usize, lo: Point2, hi: Point2) -> Triangulation {
    assert!(nx >= 1 && ny >= 1);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / nx as f64,
                lo.y + (hi.y - lo.y) * j as f64 / ny as f64,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Triangulation::new(vertices, tris).expect("grid mesh is valid")
}

pub fn single_triangle() -> Triangulation {
    Triangulation::new(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .expect("valid")
}

pub fn two_triangle_square() -> Triangulation {
    square_grid(1)
}
