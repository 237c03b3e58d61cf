//! Small dense linear algebra: least squares, nullspaces, and a row-streaming
//! Givens QR for tall sparse systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{QiError, Result};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(QiError::InvalidMatrix(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(QiError::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(QiError::InvalidMatrix("ragged rows".into()));
        }
        DenseMatrix::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(QiError::InvalidMatrix("empty matrix".into()));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(QiError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimum-norm least-squares solution of `A x = b` and `||A x - b||`.
pub fn solve_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    a.validate()?;
    if b.len() != a.rows() {
        return Err(QiError::InvalidMatrix(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(QiError::InvalidMatrix("non-finite right-hand side".into()));
    }
    let svd = a.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = f64::EPSILON * a.rows().max(a.cols()) as f64 * smax;
    let rhs = DVector::from_column_slice(b);
    let x = svd
        .solve(&rhs, cutoff)
        .map_err(|e| QiError::InvalidMatrix(e.to_string()))?;
    let x: Vec<f64> = x.iter().copied().collect();
    let ax = a.mul_vec(&x);
    let res = norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok((x, res))
}

/// Orthonormal basis of the numerical nullspace `{x : ||A x|| <= tol ||A|| ||x||}`.
pub fn nullspace(a: &DenseMatrix, rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    a.validate()?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(QiError::InvalidMatrix(format!("rel_tol {rel_tol} outside (0, 1)")));
    }
    let n = a.cols();
    // pad to a square-or-tall matrix so V^T is complete
    let mat = if a.rows() < n {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, a.rows()).copy_from(&a.to_nalgebra());
        padded
    } else {
        a.to_nalgebra()
    };
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok((0..n)
            .map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            .collect());
    }
    Ok(svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= rel_tol * smax)
        .map(|(k, _)| v_t.row(k).iter().copied().collect())
        .collect())
}

/// Least squares for tall systems fed one sparse row at a time.
///
/// Rows are folded into an upper-triangular factor with Givens rotations, so
/// memory is `O(cols^2)` regardless of the number of rows and the work per row
/// scales with the bandwidth the row fills in.
#[derive(Debug, Clone)]
pub struct StreamingLeastSquares {
    cols: usize,
    r: Vec<Vec<f64>>,
    row_end: Vec<usize>,
    occupied: Vec<bool>,
    qtb: Vec<f64>,
    discarded_sq: f64,
    rhs_sq: f64,
    work: Vec<f64>,
}

/// Result of [`StreamingLeastSquares::solve`].
#[derive(Debug, Clone)]
pub struct StreamingSolution {
    pub x: Vec<f64>,
    /// `||A x - b||` as accumulated by the rotations.
    pub residual_norm: f64,
    /// `||b||`.
    pub rhs_norm: f64,
    /// `min |R_kk| / max |R_kk|`.
    pub diagonal_ratio: f64,
}

impl StreamingLeastSquares {
    pub fn new(cols: usize) -> Self {
        StreamingLeastSquares {
            cols,
            r: vec![Vec::new(); cols],
            row_end: vec![0; cols],
            occupied: vec![false; cols],
            qtb: vec![0.0; cols],
            discarded_sq: 0.0,
            rhs_sq: 0.0,
            work: vec![0.0; cols],
        }
    }

    pub fn add_row(&mut self, entries: &[(usize, f64)], rhs: f64) -> Result<()> {
        if !rhs.is_finite() || entries.iter().any(|(c, v)| *c >= self.cols || !v.is_finite()) {
            return Err(QiError::InvalidMatrix("bad streamed row".into()));
        }
        self.rhs_sq += rhs * rhs;
        let mut b = rhs;
        let mut lo = self.cols;
        let mut hi = 0;
        for &(c, v) in entries {
            self.work[c] += v;
            lo = lo.min(c);
            hi = hi.max(c + 1);
        }
        let mut k = lo;
        while k < hi {
            let w = self.work[k];
            if w == 0.0 {
                k += 1;
                continue;
            }
            if !self.occupied[k] {
                let mut row = vec![0.0; self.cols];
                row[k..hi].copy_from_slice(&self.work[k..hi]);
                self.r[k] = row;
                self.row_end[k] = hi;
                self.occupied[k] = true;
                self.qtb[k] = b;
                self.work[k..hi].fill(0.0);
                return Ok(());
            }
            let rk = &mut self.r[k];
            let a = rk[k];
            let rad = a.hypot(w);
            let (c, s) = (a / rad, w / rad);
            let end = hi.max(self.row_end[k]);
            for j in k..end {
                let (x, y) = (rk[j], self.work[j]);
                rk[j] = c * x + s * y;
                self.work[j] = -s * x + c * y;
            }
            self.work[k] = 0.0;
            let (x, y) = (self.qtb[k], b);
            self.qtb[k] = c * x + s * y;
            b = -s * x + c * y;
            self.row_end[k] = end;
            hi = end;
            k += 1;
        }
        self.work[lo.min(hi)..hi].fill(0.0);
        self.discarded_sq += b * b;
        Ok(())
    }

    /// Back-substitution; fails when the factor is (numerically) singular,
    /// i.e. the columns do not determine a unique solution.
    pub fn solve(&self, rel_tol: f64) -> Result<StreamingSolution> {
        let diag: Vec<f64> = (0..self.cols)
            .map(|k| if self.occupied[k] { self.r[k][k].abs() } else { 0.0 })
            .collect();
        let dmax = diag.iter().copied().fold(0.0, f64::max);
        let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = if dmax > 0.0 { dmin / dmax } else { 0.0 };
        if ratio <= rel_tol {
            return Err(QiError::InvalidMatrix(format!(
                "rank deficient: min/max |R_kk| = {ratio:e}"
            )));
        }
        let mut x = vec![0.0; self.cols];
        for k in (0..self.cols).rev() {
            let row = &self.r[k];
            let mut acc = self.qtb[k];
            for j in k + 1..self.row_end[k] {
                acc -= row[j] * x[j];
            }
            x[k] = acc / row[k];
        }
        Ok(StreamingSolution {
            x,
            residual_norm: self.discarded_sq.sqrt(),
            rhs_norm: self.rhs_sq.sqrt(),
            diagonal_ratio: ratio,
        })
    }
}
