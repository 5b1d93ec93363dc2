//! Dimension of `S^r_d`: Schumaker's lower/upper bounds and an exact
//! nullity computation of the smoothness matrix.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bform::binomial;
use crate::constraints::{smoothness_matrix, SplineSpace};
use crate::linalg::numerical_rank;

pub const DEFAULT_SLOPE_TOL: f64 = 1e-9;
pub const RANK_TOL: f64 = 1e-9;
pub const MAX_RANK_COLUMNS: usize = 20_000;

#[derive(Debug, Error)]
pub enum DimensionError {
    #[error("bounds need 0 <= r <= d, got r = {0}")]
    BadSmoothness(i32),
    #[error("{0} columns exceeds the dense rank limit of {MAX_RANK_COLUMNS}")]
    TooLarge(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    pub d: usize,
    pub r: usize,
    pub e_i: usize,
    pub v_i: usize,
    pub big_d: i64,
    /// `(vertex, m_v, sigma_v)` per interior vertex in index order.
    pub sigma: Vec<(usize, usize, i64)>,
    pub sigma_tilde: Vec<(usize, usize, i64)>,
    pub lower: i64,
    pub upper: i64,
    pub rank_dim: Option<usize>,
}

impl DimensionReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d={}", self.d);
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "E_I={}", self.e_i);
        let _ = writeln!(s, "V_I={}", self.v_i);
        let _ = writeln!(s, "D={}", self.big_d);
        let join = |v: &[(usize, usize, i64)], f: fn(&(usize, usize, i64)) -> String| {
            v.iter().map(f).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(s, "m_v={}", join(&self.sigma, |x| format!("{}:{}", x.0, x.1)));
        let _ = writeln!(s, "sigma={}", join(&self.sigma, |x| format!("{}:{}", x.0, x.2)));
        let _ = writeln!(s, "m_tilde={}", join(&self.sigma_tilde, |x| format!("{}:{}", x.0, x.1)));
        let _ = writeln!(
            s,
            "sigma_tilde={}",
            join(&self.sigma_tilde, |x| format!("{}:{}", x.0, x.2))
        );
        let _ = writeln!(s, "L={}", self.lower);
        let _ = writeln!(s, "U={}", self.upper);
        if let Some(k) = self.rank_dim {
            let _ = writeln!(s, "rank_dim={k}");
        }
        s
    }
}

/// Number of distinct values among `angles` (taken mod pi) with tolerance.
pub fn distinct_slopes(angles: &[f64], tol: f64) -> usize {
    if angles.is_empty() {
        return 0;
    }
    let mut a: Vec<f64> = angles.iter().map(|&x| x.rem_euclid(PI)).collect();
    a.sort_by(|x, y| x.total_cmp(y));
    let mut count = 1;
    for w in a.windows(2) {
        if w[1] - w[0] >= tol {
            count += 1;
        }
    }
    // the first and last cluster may be the same slope across the 0/pi seam
    if count > 1 && a[0] + PI - a[a.len() - 1] < tol {
        count -= 1;
    }
    count
}

fn sigma(d: usize, r: usize, m: usize) -> i64 {
    (1..=d - r)
        .map(|j| (r as i64 + j as i64 + 1 - (j * m) as i64).max(0))
        .sum()
}

/// Schumaker bounds `L = D + sum sigma_v` and `U = D + sum sigma~_v`.
///
/// For the upper bound interior vertices are processed in increasing index
/// order; at vertex `v`, `m~_v` counts distinct slopes among edges from `v`
/// to boundary vertices or to interior vertices already processed (lower
/// index). Edges to later interior vertices are left for those vertices.
pub fn schumaker_bounds(space: &SplineSpace, slope_tol: f64) -> Result<DimensionReport, DimensionError> {
    let r = space.smoothness();
    if r < 0 {
        return Err(DimensionError::BadSmoothness(r));
    }
    let r = r as usize;
    let d = space.degree();
    let et = space.edges();
    let e_i = et.num_interior_edges();
    let v_i = et.num_interior_vertices();
    let c = |n: usize| binomial(n, 2) as i64;
    let big_d = c(d + 2) + c(d - r + 1) * e_i as i64 - (c(d + 2) - c(r + 2)) * v_i as i64;
    let pts = space.mesh().vertices();
    let angle = |v: usize, w: usize| {
        let u = pts[w] - pts[v];
        u.y.atan2(u.x)
    };
    let mut sig = Vec::with_capacity(v_i);
    let mut sig_t = Vec::with_capacity(v_i);
    for v in et.interior_vertices() {
        let nbrs: Vec<usize> = et.vertex_edges[v].iter().map(|&e| et.other_end(e, v)).collect();
        let all: Vec<f64> = nbrs.iter().map(|&w| angle(v, w)).collect();
        let m = distinct_slopes(&all, slope_tol);
        let chosen: Vec<f64> = nbrs
            .iter()
            .filter(|&&w| et.boundary_vertex[w] || w < v)
            .map(|&w| angle(v, w))
            .collect();
        let mt = distinct_slopes(&chosen, slope_tol);
        sig.push((v, m, sigma(d, r, m)));
        sig_t.push((v, mt, sigma(d, r, mt)));
    }
    let lower = big_d + sig.iter().map(|x| x.2).sum::<i64>();
    let upper = big_d + sig_t.iter().map(|x| x.2).sum::<i64>();
    Ok(DimensionReport {
        d,
        r,
        e_i,
        v_i,
        big_d,
        sigma: sig,
        sigma_tilde: sig_t,
        lower,
        upper,
        rank_dim: None,
    })
}

/// `#coeffs - rank(H)` with a relative singular-value tolerance.
pub fn dim_via_rank(space: &SplineSpace) -> Result<usize, DimensionError> {
    let n = space.num_coeffs();
    if n > MAX_RANK_COLUMNS {
        return Err(DimensionError::TooLarge(n));
    }
    let h = smoothness_matrix(space);
    if h.nrows() == 0 {
        return Ok(n);
    }
    let rk = numerical_rank(h.matrix.to_dense().as_ref(), RANK_TOL);
    Ok(n - rk)
}

/// Bounds plus the rank oracle.
pub fn dimension_report(space: &SplineSpace, slope_tol: f64) -> Result<DimensionReport, DimensionError> {
    let mut rep = schumaker_bounds(space, slope_tol)?;
    rep.rank_dim = Some(dim_via_rank(space)?);
    Ok(rep)
}
