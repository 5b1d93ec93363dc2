//! Equality-constrained and penalized least squares over spline coefficients.
//!
//! Problems have the form
//!
//! ```text
//! minimize   sum_k w_k ||A_k c - f_k||^2 + lambda c^T E c
//! subject to C c = g
//! ```
//!
//! and are solved with an augmented-Lagrangian loop on the stacked system
//! `[sqrt(mu) C; objective rows]`. Objective rows that touch a single
//! triangle block are first compressed blockwise by QR, so the stacked
//! matrix stays small even with tens of thousands of data points. The
//! stacked factorization is computed once and reused across outer
//! iterations and right-hand sides.

use std::fmt::Write as _;

use faer::Mat;
use thiserror::Error;

use crate::bform::{derivative_map, ncoef, product_integral_matrix};
use crate::constraints::{ConstraintBlock, SplineSpace};
use crate::linalg::{cholesky_lower, norm2, LeastSquaresFactor, QrFactor};
use crate::sparse::{SparseBuilder, SparseMatrix};

#[derive(Debug, Error)]
pub enum LsqError {
    #[error("column count mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("constraints are infeasible: violation {violation:.3e} after {iterations} iterations")]
    Infeasible { violation: f64, iterations: usize },
    #[error("problem has no objective rows and no constraints")]
    Empty,
}

#[derive(Clone, Debug)]
pub struct LsqConfig {
    /// Relative pivot threshold for rank detection.
    pub rank_tol: f64,
    /// Constraint violation regarded as satisfied.
    pub accept_tol: f64,
    /// Violation at which the outer iteration stops early. Kept far below
    /// `accept_tol` because derivative jumps amplify coefficient residue.
    pub stop_tol: f64,
    /// Constraint violation above which the problem is declared infeasible.
    pub infeasible_tol: f64,
    pub max_outer: usize,
    /// `mu = penalty * ||objective||_F^2 / ||C||_F^2`.
    pub penalty: f64,
}

impl Default for LsqConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-9,
            accept_tol: 1e-8,
            stop_tol: 1e-14,
            infeasible_tol: 1e-4,
            max_outer: 3,
            penalty: 1e6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObjectiveTerm {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub weight: f64,
}

/// Thin-plate energy stored through a root `J` with `E = J^T J`.
#[derive(Clone, Debug)]
pub struct EnergyMatrix {
    pub root: SparseMatrix,
}

impl EnergyMatrix {
    pub fn ncols(&self) -> usize {
        self.root.ncols()
    }

    /// `c^T E c`.
    pub fn value(&self, c: &[f64]) -> f64 {
        self.root.mul_vec(c).iter().map(|v| v * v).sum()
    }

    /// Assembled `E` (block diagonal for spline energies).
    pub fn matrix(&self) -> SparseMatrix {
        let n = self.ncols();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.root.nrows()];
        for (i, j, v) in self.root.triplets() {
            cols[i].push((j, v));
        }
        let mut acc: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for row in &cols {
            for &(a, va) in row {
                for &(b, vb) in row {
                    *acc.entry((a, b)).or_default() += va * vb;
                }
            }
        }
        let trip: Vec<(usize, usize, f64)> = acc.into_iter().map(|((a, b), v)| (a, b, v)).collect();
        SparseMatrix::from_triplets(n, n, &trip).expect("in range")
    }

    /// Root of a symmetric positive semidefinite matrix given explicitly.
    pub fn from_symmetric(e: &SparseMatrix) -> Self {
        let n = e.ncols();
        let dense = e.to_dense();
        let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (dense[(i, j)] + dense[(j, i)]));
        let eig = sym
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("symmetric eigensolver did not converge");
        let s = eig.S().column_vector();
        let u = eig.U();
        let mut b = SparseBuilder::new(n);
        for k in 0..n {
            if s[k] <= 0.0 {
                continue;
            }
            let w = s[k].sqrt();
            b.push_row((0..n).map(|j| (j, w * u[(j, k)])).filter(|(_, v)| *v != 0.0));
        }
        Self { root: b.build() }
    }
}

/// Per-triangle energy root `J_t = [L^T G_xx; sqrt(2) L^T G_xy; L^T G_yy]`
/// where `L L^T` is the degree `d-2` Gram matrix.
pub fn energy_matrix(space: &SplineSpace) -> EnergyMatrix {
    let d = space.degree();
    let n = space.num_coeffs();
    let nb = space.block_size();
    let mut b = SparseBuilder::new(n);
    if d < 2 {
        return EnergyMatrix { root: b.build() };
    }
    let nl = ncoef(d - 2);
    // Gram matrix of unit area; scaled by sqrt(area) per triangle.
    let m0 = product_integral_matrix(d - 2, 1.0);
    let m0 = Mat::<f64>::from_fn(nl, nl, |i, j| m0[i * nl + j]);
    let l0 = cholesky_lower(m0.as_ref()).expect("Bernstein Gram matrix is positive definite");
    for t in 0..space.mesh().num_triangles() {
        let g = space.geom(t);
        let sa = g.area.sqrt();
        for (dirs, w) in [
            ([g.dx, g.dx], 1.0),
            ([g.dx, g.dy], std::f64::consts::SQRT_2),
            ([g.dy, g.dy], 1.0),
        ] {
            let gm = derivative_map(d, &dirs);
            // rows of L^T G
            for i in 0..nl {
                let mut row = vec![0.0; nb];
                for k in i..nl {
                    let lki = l0[(k, i)];
                    if lki == 0.0 {
                        continue;
                    }
                    for (j, rj) in row.iter_mut().enumerate() {
                        *rj += lki * gm[k][j];
                    }
                }
                b.push_row(
                    row.into_iter()
                        .enumerate()
                        .filter(|(_, v)| *v != 0.0)
                        .map(|(j, v)| (t * nb + j, w * sa * v)),
                );
            }
        }
    }
    EnergyMatrix { root: b.build() }
}

#[derive(Clone, Debug, Default)]
pub struct QuadraticProgram {
    pub ncols: usize,
    pub terms: Vec<ObjectiveTerm>,
    pub energy: Option<(EnergyMatrix, f64)>,
    pub equalities: Vec<ConstraintBlock>,
    /// Width of coefficient blocks for row compression (one triangle).
    pub block_size: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub c: Vec<f64>,
    /// `||A_k c - f_k||` per objective term (unweighted).
    pub residuals: Vec<f64>,
    pub energy: Option<f64>,
    /// `max_k ||C_k c - g_k||_inf`.
    pub constraint_violation: f64,
    pub iterations: usize,
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
    pub epsilon1: Option<f64>,
}

impl SolveReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncoef={}", self.c.len());
        for (k, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(s, "residual_{k}={r:.17e}");
        }
        if let Some(e) = self.energy {
            let _ = writeln!(s, "energy={e:.17e}");
        }
        let _ = writeln!(s, "constraint_violation={:.17e}", self.constraint_violation);
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "rank_deficient={}", self.rank_deficient);
        if let Some(e) = self.epsilon1 {
            let _ = writeln!(s, "epsilon1={e:.17e}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning={w}");
        }
        s
    }
}

/// A factored constrained least-squares problem that can be solved for
/// many right-hand sides.
pub struct PreparedSolve {
    ncols: usize,
    cfg: LsqConfig,
    constraint: SparseMatrix,
    sqrt_mu: f64,
    // objective row -> (block or None, position inside the block's row list)
    row_slot: Vec<RowSlot>,
    blocks: Vec<(usize, usize, QrFactor)>, // (block index, row count, QR)
    n_global: usize,
    factor: LeastSquaresFactor,
}

#[derive(Clone, Copy, Debug)]
enum RowSlot {
    Block { slot: usize, pos: usize },
    Global(usize),
}

impl PreparedSolve {
    /// `objective` holds the already weighted objective rows, `constraint`
    /// the stacked equality rows.
    pub fn new(
        objective: &SparseMatrix,
        constraint: &SparseMatrix,
        block_size: Option<usize>,
        cfg: LsqConfig,
    ) -> Result<Self, LsqError> {
        let n = objective.ncols();
        if constraint.ncols() != n {
            return Err(LsqError::Shape {
                expected: n,
                got: constraint.ncols(),
            });
        }
        if objective.nrows() == 0 && constraint.nrows() == 0 {
            return Err(LsqError::Empty);
        }

        // classify rows
        let nblocks = block_size.map_or(0, |b| n.div_ceil(b.max(1)));
        let mut block_rows: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
        let mut global_rows = Vec::new();
        let mut row_block = vec![None; objective.nrows()];
        for (i, slot) in row_block.iter_mut().enumerate() {
            let blk = block_size.and_then(|bs| {
                let mut it = objective.row(i).map(|(c, _)| c / bs);
                let first = it.next()?;
                it.all(|b| b == first).then_some(first)
            });
            match blk {
                Some(b) => {
                    *slot = Some((b, block_rows[b].len()));
                    block_rows[b].push(i);
                }
                None => global_rows.push(i),
            }
        }
        let bs = block_size.unwrap_or(0);
        let mut slot_of_block = vec![usize::MAX; nblocks];
        let mut blocks = Vec::new();
        for (b, rows) in block_rows.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let lo = b * bs;
            let w = bs.min(n - lo);
            let mut local = Mat::<f64>::zeros(rows.len(), w);
            for (k, &i) in rows.iter().enumerate() {
                for (c, v) in objective.row(i) {
                    local[(k, c - lo)] += v;
                }
            }
            slot_of_block[b] = blocks.len();
            blocks.push((b, rows.len(), QrFactor::new(local.as_ref())));
        }
        let mut row_slot = Vec::with_capacity(objective.nrows());
        let mut gpos = 0;
        for rb in &row_block {
            row_slot.push(match rb {
                Some((b, pos)) => RowSlot::Block {
                    slot: slot_of_block[*b],
                    pos: *pos,
                },
                None => {
                    gpos += 1;
                    RowSlot::Global(gpos - 1)
                }
            });
        }

        let obj_f = objective.frobenius_sq();
        let con_f = constraint.frobenius_sq();
        let mu = if con_f == 0.0 || obj_f == 0.0 {
            1.0
        } else {
            cfg.penalty * obj_f / con_f
        };
        let sqrt_mu = mu.sqrt();

        // stacked system: constraints first, then compressed blocks, then global rows
        let nc = constraint.nrows();
        let nrows = nc + blocks.iter().map(|(_, _, q)| q.r().nrows()).sum::<usize>() + global_rows.len();
        let mut s = Mat::<f64>::zeros(nrows, n);
        for (i, j, v) in constraint.triplets() {
            s[(i, j)] += sqrt_mu * v;
        }
        let mut off = nc;
        for (b, _, q) in &blocks {
            let r = q.r();
            let lo = b * bs;
            for i in 0..r.nrows() {
                for j in i..r.ncols() {
                    s[(off + i, lo + j)] = r[(i, j)];
                }
            }
            off += r.nrows();
        }
        for &i in &global_rows {
            for (c, v) in objective.row(i) {
                s[(off, c)] += v;
            }
            off += 1;
        }
        let factor = LeastSquaresFactor::new(s.as_ref(), cfg.rank_tol);
        Ok(Self {
            ncols: n,
            cfg,
            constraint: constraint.clone(),
            sqrt_mu,
            row_slot,
            blocks,
            n_global: global_rows.len(),
            factor,
        })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank_deficient(&self) -> bool {
        self.factor.is_rank_deficient()
    }

    /// Compresses objective right-hand sides (one per column) into the
    /// stacked-system layout below the constraint rows.
    fn compress(&self, f: &Mat<f64>) -> Mat<f64> {
        let k = f.ncols();
        let mut per_block: Vec<Mat<f64>> = self
            .blocks
            .iter()
            .map(|(_, rows, _)| Mat::zeros(*rows, k))
            .collect();
        let mut global = Mat::<f64>::zeros(self.n_global, k);
        for (i, slot) in self.row_slot.iter().enumerate() {
            for j in 0..k {
                match *slot {
                    RowSlot::Block { slot, pos } => per_block[slot][(pos, j)] = f[(i, j)],
                    RowSlot::Global(g) => global[(g, j)] = f[(i, j)],
                }
            }
        }
        let total = self.blocks.iter().map(|(_, _, q)| q.r().nrows()).sum::<usize>() + self.n_global;
        let mut out = Mat::<f64>::zeros(total, k);
        let mut off = 0;
        for ((_, _, q), fb) in self.blocks.iter().zip(&per_block) {
            let qt = q.apply_qt(fb.as_ref());
            out.as_mut().get_mut(off..off + qt.nrows(), ..).copy_from(&qt);
            off += qt.nrows();
        }
        out.as_mut().get_mut(off.., ..).copy_from(&global);
        out
    }

    /// Solves for every column of `f` (objective rhs) with constraint rhs `g`
    /// (one column per problem, or a single column shared by all).
    /// Returns the coefficients (one column per problem), iterations used
    /// and the final violation per problem.
    pub fn solve_many(&self, f: &Mat<f64>, g: &Mat<f64>) -> (Mat<f64>, usize, Vec<f64>) {
        self.solve_many_from(f, g, None)
    }

    /// As [`solve_many`](Self::solve_many) with an initial scaled multiplier
    /// estimate `u0` (one entry per constraint row, shared by all columns).
    pub fn solve_many_from(
        &self,
        f: &Mat<f64>,
        g: &Mat<f64>,
        u0: Option<&[f64]>,
    ) -> (Mat<f64>, usize, Vec<f64>) {
        let k = f.ncols();
        let nc = self.constraint.nrows();
        let gcol = |i: usize, j: usize| if g.ncols() == 1 { g[(i, 0)] } else { g[(i, j)] };
        let obj = self.compress(f);
        let mut rhs = Mat::<f64>::zeros(nc + obj.nrows(), k);
        rhs.as_mut().get_mut(nc.., ..).copy_from(&obj);
        let mut u = Mat::<f64>::from_fn(nc, k, |i, _| u0.map_or(0.0, |u| u[i]));
        let mut c = Mat::<f64>::zeros(self.ncols, k);
        let mut viol = vec![0.0; k];
        let mut iters = 0;
        let outer = if nc == 0 { 1 } else { self.cfg.max_outer.max(1) };
        for _ in 0..outer {
            for j in 0..k {
                for i in 0..nc {
                    rhs[(i, j)] = self.sqrt_mu * (gcol(i, j) - u[(i, j)]);
                }
            }
            c = self.factor.solve(rhs.as_ref());
            iters += 1;
            if nc == 0 {
                break;
            }
            let mut worst = 0.0f64;
            for j in 0..k {
                let cj: Vec<f64> = (0..self.ncols).map(|i| c[(i, j)]).collect();
                let r = self.constraint.mul_vec(&cj);
                let mut vj = 0.0f64;
                for i in 0..nc {
                    let e = r[i] - gcol(i, j);
                    u[(i, j)] += e;
                    vj = vj.max(e.abs());
                }
                viol[j] = vj;
                worst = worst.max(vj);
            }
            if worst <= self.cfg.stop_tol {
                break;
            }
        }
        (c, iters, viol)
    }
}

impl QuadraticProgram {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), LsqError> {
        let bad = self
            .terms
            .iter()
            .map(|t| t.matrix.ncols())
            .chain(self.energy.iter().map(|e| e.0.ncols()))
            .chain(self.equalities.iter().map(|e| e.matrix.ncols()))
            .find(|&c| c != self.ncols);
        match bad {
            Some(got) => Err(LsqError::Shape {
                expected: self.ncols,
                got,
            }),
            None => Ok(()),
        }
    }

    /// Weighted objective rows and rhs.
    pub fn stacked_objective(&self) -> (SparseMatrix, Vec<f64>) {
        let mut b = SparseBuilder::new(self.ncols);
        let mut f = Vec::new();
        for t in &self.terms {
            let w = t.weight.sqrt();
            for i in 0..t.matrix.nrows() {
                b.push_row(t.matrix.row(i).map(|(c, v)| (c, w * v)));
            }
            f.extend(t.rhs.iter().map(|v| w * v));
        }
        if let Some((e, lambda)) = &self.energy {
            if *lambda > 0.0 {
                let w = lambda.sqrt();
                for i in 0..e.root.nrows() {
                    b.push_row(e.root.row(i).map(|(c, v)| (c, w * v)));
                }
                f.extend(std::iter::repeat_n(0.0, e.root.nrows()));
            }
        }
        (b.build(), f)
    }

    pub fn stacked_constraints(&self) -> (SparseMatrix, Vec<f64>) {
        let mut b = SparseBuilder::new(self.ncols);
        let mut g = Vec::new();
        for blk in &self.equalities {
            b.append(&blk.matrix);
            g.extend_from_slice(&blk.rhs);
        }
        (b.build(), g)
    }

    /// Objective value `sum w_k ||A_k c - f_k||^2 + lambda c^T E c`.
    pub fn objective(&self, c: &[f64]) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let r = t.matrix.mul_vec(c);
            v += t.weight * r.iter().zip(&t.rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        if let Some((e, lambda)) = &self.energy {
            v += lambda * e.value(c);
        }
        v
    }

    pub fn report(&self, c: Vec<f64>, iterations: usize, rank_deficient: bool) -> SolveReport {
        let residuals = self
            .terms
            .iter()
            .map(|t| {
                let r = t.matrix.mul_vec(&c);
                norm2(&r.iter().zip(&t.rhs).map(|(a, b)| a - b).collect::<Vec<_>>())
            })
            .collect();
        let energy = self.energy.as_ref().map(|(e, _)| e.value(&c));
        let constraint_violation = self
            .equalities
            .iter()
            .map(|b| b.violation(&c))
            .fold(0.0, f64::max);
        SolveReport {
            c,
            residuals,
            energy,
            constraint_violation,
            iterations,
            rank_deficient,
            warnings: Vec::new(),
            epsilon1: None,
        }
    }

    pub fn prepare(&self, cfg: &LsqConfig) -> Result<PreparedSolve, LsqError> {
        self.check()?;
        let (a, _) = self.stacked_objective();
        let (c, _) = self.stacked_constraints();
        PreparedSolve::new(&a, &c, self.block_size, cfg.clone())
    }

    pub fn solve(&self, cfg: &LsqConfig) -> Result<SolveReport, LsqError> {
        self.solve_shifted(cfg, None)
    }

    /// Like [`solve`](Self::solve) but starting the multiplier estimate at
    /// `shift` instead of zero.
    pub fn solve_shifted(&self, cfg: &LsqConfig, shift: Option<&[f64]>) -> Result<SolveReport, LsqError> {
        self.check()?;
        let (a, f) = self.stacked_objective();
        let (cm, g) = self.stacked_constraints();
        let prep = PreparedSolve::new(&a, &cm, self.block_size, cfg.clone())?;
        let fm = Mat::<f64>::from_fn(f.len(), 1, |i, _| f[i]);
        let gm = Mat::<f64>::from_fn(g.len(), 1, |i, _| g[i]);
        let (c, iters, _) = prep.solve_many_from(&fm, &gm, shift);
        let c: Vec<f64> = (0..self.ncols).map(|i| c[(i, 0)]).collect();
        let mut rep = self.report(c, iters, prep.rank_deficient());
        if rep.rank_deficient {
            rep.warnings
                .push("stacked system is rank deficient; returned a basic solution".into());
        }
        finish(rep, cfg)
    }

    /// Null-space method on dense matrices: `c = c0 + Z y` with `Z` an
    /// orthonormal basis of `null(C)` and `c0` the minimum-norm solution of
    /// `C c = g`. Intended for small problems and as an independent check.
    pub fn solve_direct(&self, cfg: &LsqConfig) -> Result<SolveReport, LsqError> {
        self.check()?;
        let n = self.ncols;
        let (a, f) = self.stacked_objective();
        let (cm, g) = self.stacked_constraints();
        let (c0, z) = if cm.nrows() == 0 {
            (vec![0.0; n], Mat::<f64>::identity(n, n))
        } else {
            let m = cm.nrows().max(n);
            let mut dense = Mat::<f64>::zeros(m, n);
            dense.as_mut().get_mut(..cm.nrows(), ..).copy_from(cm.to_dense());
            let svd = dense.svd().expect("svd did not converge");
            let s = svd.S().column_vector();
            let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
            let rk = (0..s.nrows()).filter(|&i| s[i] > cfg.rank_tol * smax).count();
            let u = svd.U();
            let v = svd.V();
            // c0 = V_r S_r^-1 U_r^T g
            let mut c0 = vec![0.0; n];
            for k in 0..rk {
                let coef: f64 = (0..cm.nrows()).map(|i| u[(i, k)] * g[i]).sum::<f64>() / s[k];
                for (i, ci) in c0.iter_mut().enumerate() {
                    *ci += coef * v[(i, k)];
                }
            }
            (c0, v.get(.., rk..).to_owned())
        };
        let ad = a.to_dense();
        let r0: Vec<f64> = crate::linalg::mat_vec(ad.as_ref(), &c0)
            .iter()
            .zip(&f)
            .map(|(x, y)| y - x)
            .collect();
        let az = &ad * &z;
        let c = if z.ncols() == 0 || az.nrows() == 0 {
            c0
        } else {
            let fac = LeastSquaresFactor::new(az.as_ref(), cfg.rank_tol);
            let y = fac.solve_vec(&r0);
            let zy = crate::linalg::mat_vec(z.as_ref(), &y);
            c0.iter().zip(&zy).map(|(a, b)| a + b).collect()
        };
        let rep = self.report(c, 1, false);
        finish(rep, cfg)
    }
}

/// Applies the infeasibility and acceptance tests to a finished solve.
pub fn finish(mut rep: SolveReport, cfg: &LsqConfig) -> Result<SolveReport, LsqError> {
    if rep.constraint_violation > cfg.infeasible_tol {
        return Err(LsqError::Infeasible {
            violation: rep.constraint_violation,
            iterations: rep.iterations,
        });
    }
    if rep.constraint_violation > cfg.accept_tol {
        rep.warnings.push(format!(
            "constraint violation {:.3e} above acceptance tolerance",
            rep.constraint_violation
        ));
    }
    Ok(rep)
}
