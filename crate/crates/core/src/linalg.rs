//! Dense least-squares kernels backed by faer.
//!
//! All factorizations run sequentially so results are bitwise reproducible
//! regardless of the thread pool the caller happens to be on.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::triangular_solve;
use faer::{Conj, Mat, MatRef, Par};

/// Householder QR of a tall matrix with rank detection.
///
/// The unpivoted factorization is tried first; if its triangular factor shows
/// a diagonal entry below `rank_tol * max|R_ii|` the matrix is refactored with
/// column pivoting and solves return the basic solution on the leading
/// well-conditioned columns.
pub struct LeastSquaresFactor {
    nrows: usize,
    ncols: usize,
    basis: Mat<f64>,
    coeff: Mat<f64>,
    r: Mat<f64>,
    // Some(forward permutation) when column pivoting was needed.
    perm: Option<Vec<usize>>,
    rank: usize,
}

impl LeastSquaresFactor {
    pub fn new(a: MatRef<'_, f64>, rank_tol: f64) -> Self {
        let ncols = a.ncols();
        let nrows_in = a.nrows();
        // Underdetermined systems are padded with zero rows; they come out
        // rank deficient and take the pivoted path.
        let padded;
        let a = if nrows_in < ncols {
            let mut p = Mat::<f64>::zeros(ncols, ncols);
            p.as_mut().get_mut(..nrows_in, ..).copy_from(a);
            padded = p;
            padded.as_ref()
        } else {
            a
        };
        let nrows = a.nrows();

        if ncols == 0 {
            return Self {
                nrows,
                ncols,
                basis: Mat::zeros(nrows, 0),
                coeff: Mat::zeros(1, 0),
                r: Mat::zeros(0, 0),
                perm: None,
                rank: 0,
            };
        }

        let qr = a.qr();
        let r = qr.R().get(..ncols, ..ncols).to_owned();
        if leading_rank(r.as_ref(), rank_tol) == ncols {
            return Self {
                nrows,
                ncols,
                basis: qr.Q_basis().to_owned(),
                coeff: qr.Q_coeff().to_owned(),
                r,
                perm: None,
                rank: ncols,
            };
        }

        let qr = a.col_piv_qr();
        let r = qr.R().get(..ncols, ..ncols).to_owned();
        let rank = leading_rank(r.as_ref(), rank_tol);
        let (fwd, _) = qr.P().arrays();
        Self {
            nrows,
            ncols,
            basis: qr.Q_basis().to_owned(),
            coeff: qr.Q_coeff().to_owned(),
            r,
            perm: Some(fwd.to_vec()),
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.ncols
    }

    /// Solves `min ||A x - b||` for every column of `rhs` (which has the
    /// original, unpadded row count).
    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let k = rhs.ncols();
        let mut work = Mat::<f64>::zeros(self.nrows, k);
        work.as_mut().get_mut(..rhs.nrows(), ..).copy_from(rhs);
        if self.ncols == 0 {
            return Mat::zeros(0, k);
        }
        let block = self.coeff.nrows();
        let mut buf = MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                self.nrows, block, k,
            ),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            self.basis.as_ref(),
            self.coeff.as_ref(),
            Conj::No,
            work.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        let rk = self.rank;
        let mut top = work.as_ref().get(..rk, ..).to_owned();
        triangular_solve::solve_upper_triangular_in_place(
            self.r.as_ref().get(..rk, ..rk),
            top.as_mut(),
            Par::Seq,
        );
        let mut out = Mat::<f64>::zeros(self.ncols, k);
        match &self.perm {
            None => out.as_mut().get_mut(..rk, ..).copy_from(top.as_ref()),
            Some(fwd) => {
                for j in 0..k {
                    for i in 0..rk {
                        out[(fwd[i], j)] = top[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::ColRef::from_slice(rhs).as_mat();
        let x = self.solve(b);
        (0..self.ncols).map(|i| x[(i, 0)]).collect()
    }
}

/// Plain Householder QR of a (row-padded) matrix, used to compress blocks of
/// least-squares rows into their triangular factor.
pub struct QrFactor {
    nrows: usize,
    basis: Mat<f64>,
    coeff: Mat<f64>,
    r: Mat<f64>,
}

impl QrFactor {
    pub fn new(a: MatRef<'_, f64>) -> Self {
        let n = a.ncols();
        let m = a.nrows().max(n);
        let mut p = Mat::<f64>::zeros(m, n);
        p.as_mut().get_mut(..a.nrows(), ..).copy_from(a);
        let qr = p.qr();
        Self {
            nrows: m,
            basis: qr.Q_basis().to_owned(),
            coeff: qr.Q_coeff().to_owned(),
            r: qr.R().get(..n, ..n).to_owned(),
        }
    }

    /// Upper triangular `n x n` factor.
    pub fn r(&self) -> MatRef<'_, f64> {
        self.r.as_ref()
    }

    /// Leading `n` rows of `Q^T rhs`.
    pub fn apply_qt(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let k = rhs.ncols();
        let n = self.r.ncols();
        let mut work = Mat::<f64>::zeros(self.nrows, k);
        work.as_mut().get_mut(..rhs.nrows(), ..).copy_from(rhs);
        if n == 0 {
            return Mat::zeros(0, k);
        }
        let mut buf = MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                self.nrows,
                self.coeff.nrows(),
                k,
            ),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            self.basis.as_ref(),
            self.coeff.as_ref(),
            Conj::No,
            work.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        work.as_ref().get(..n, ..).to_owned()
    }
}

fn leading_rank(r: MatRef<'_, f64>, rank_tol: f64) -> usize {
    let n = r.ncols();
    let scale = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    // With pivoting the diagonal is non-increasing, so the first small entry
    // marks the numerical rank; without pivoting any small entry flags it.
    (0..n)
        .position(|i| r[(i, i)].abs() <= rank_tol * scale)
        .unwrap_or(n)
}

/// Numerical rank from singular values: count of `sigma_i > tol * sigma_max`.
pub fn numerical_rank(a: MatRef<'_, f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a
        .singular_values()
        .expect("singular value iteration did not converge");
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let llt = a.llt(faer::Side::Lower).ok()?;
    Some(llt.L().to_owned())
}

pub fn mat_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}
