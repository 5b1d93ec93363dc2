//! Compressed sparse row matrices and Matrix-Market coordinate I/O.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use faer::Mat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Row-by-row builder; entries within a row keep insertion order and
/// duplicate columns are summed.
#[derive(Clone, Debug)]
pub struct SparseBuilder {
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBuilder {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends one row given as (column, value) pairs.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        let start = self.col_idx.len();
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            if let Some(pos) = self.col_idx[start..].iter().position(|&x| x == c) {
                self.values[start + pos] += v;
            } else {
                self.col_idx.push(c);
                self.values.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn append(&mut self, other: &SparseMatrix) {
        assert_eq!(self.ncols, other.ncols);
        for i in 0..other.nrows {
            self.push_row(other.row(i));
        }
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.row_ptr.len() - 1,
            ncols: self.ncols,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            values: self.values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SparseError::OutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            rows[r].push((c, v));
        }
        let mut b = SparseBuilder::new(ncols);
        for row in rows {
            b.push_row(row);
        }
        Ok(b.build())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(c, v)| (i, c, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Vertical concatenation.
    pub fn vstack(blocks: &[&SparseMatrix], ncols: usize) -> SparseMatrix {
        let mut b = SparseBuilder::new(ncols);
        for m in blocks {
            b.append(m);
        }
        b.build()
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<(), SparseError> {
        std::fs::write(path, self.to_matrix_market())?;
        Ok(())
    }

    pub fn parse_matrix_market(text: &str) -> Result<Self, SparseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SparseError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let h = header.to_ascii_lowercase();
        if !h.starts_with("%%matrixmarket") || !h.contains("coordinate") {
            return Err(SparseError::Parse {
                line: 1,
                msg: "expected a coordinate MatrixMarket header".into(),
            });
        }
        let symmetric = h.contains("symmetric");
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for (ln, line) in lines {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let parse_err = |msg: &str| SparseError::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = t.split_whitespace().collect();
            if dims.is_none() {
                if f.len() != 3 {
                    return Err(parse_err("size line needs 3 fields"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err("bad integer"));
                dims = Some((p(f[0])?, p(f[1])?, p(f[2])?));
                continue;
            }
            if f.len() < 3 {
                return Err(parse_err("entry needs 3 fields"));
            }
            let i: usize = f[0].parse().map_err(|_| parse_err("bad row index"))?;
            let j: usize = f[1].parse().map_err(|_| parse_err("bad column index"))?;
            let v: f64 = f[2].parse().map_err(|_| parse_err("bad value"))?;
            if i == 0 || j == 0 {
                return Err(parse_err("indices are 1-based"));
            }
            triplets.push((i - 1, j - 1, v));
            if symmetric && i != j {
                triplets.push((j - 1, i - 1, v));
            }
        }
        let (nr, nc, _) = dims.ok_or(SparseError::Parse {
            line: 0,
            msg: "missing size line".into(),
        })?;
        Self::from_triplets(nr, nc, &triplets)
    }

    pub fn read_matrix_market(path: &Path) -> Result<Self, SparseError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_matrix_market(&text)
    }
}
