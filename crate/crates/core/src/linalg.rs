//! Small dense linear algebra used by the chain analysis.
//!
//! Transition blocks in this crate are modest (tens to a few thousand
//! rows), dense, and consumed by a handful of fixed kernels — row-vector
//! products for distribution propagation, triangular and LU solves for
//! hitting times, and determinants for the eigenvalue fallback — so a flat
//! row-major buffer beats pulling in a general matrix library.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            if row.len() != n_cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    /// Row-vector product `v^T M`, the propagation step for distributions.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_rows, "left_mul dimension mismatch");
        let mut out = vec![0.0; self.n_cols];
        for (vi, row) in v.iter().zip(self.rows()) {
            if *vi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += vi * m;
            }
        }
        out
    }

    /// Column-vector product `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols, "mul_vec dimension mismatch");
        self.rows().map(|row| dot(row, v)).collect()
    }

    /// True when every entry strictly above the diagonal is at most `tol`
    /// in magnitude.
    pub fn is_lower_triangular(&self, tol: f64) -> bool {
        (0..self.n_rows).all(|i| (i + 1..self.n_cols).all(|j| self.get(i, j).abs() <= tol))
    }

    /// True when every entry strictly below the diagonal is at most `tol`
    /// in magnitude.
    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        (1..self.n_rows).all(|i| (0..i.min(self.n_cols)).all(|j| self.get(i, j).abs() <= tol))
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Maximum absolute row sum (the induced infinity norm).
    pub fn inf_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `L x = b` by forward substitution for a lower-triangular `L`.
///
/// Entries above the diagonal are ignored; a vanishing diagonal entry is
/// reported as singular.
pub fn solve_lower_triangular(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    assert!(l.is_square(), "triangular solve needs a square matrix");
    assert_eq!(b.len(), l.n_rows(), "right-hand side length mismatch");
    let n = l.n_rows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let diag = l.get(i, i);
        if diag.abs() < f64::MIN_POSITIVE {
            return Err(LinalgError::Singular {
                col: i,
                pivot: diag,
            });
        }
        let partial: f64 = (0..i).map(|j| l.get(i, j) * x[j]).sum();
        x[i] = (b[i] - partial) / diag;
    }
    Ok(x)
}

/// Solves `A x = b` by LU decomposition with partial pivoting.
///
/// Pivots smaller than `1e-12 * max(1, ||A||_inf)` are treated as exact
/// rank deficiency: systems that close to singular describe chains whose
/// hitting times are too large to mean anything.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    assert!(a.is_square(), "lu_solve needs a square matrix");
    assert_eq!(b.len(), a.n_rows(), "right-hand side length mismatch");
    let n = a.n_rows();
    let tol = 1e-12 * a.inf_norm().max(1.0);
    let mut lu = a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| lu.get(r, col).abs().total_cmp(&lu.get(s, col).abs()))
            .expect("non-empty pivot search");
        let pivot = lu.get(pivot_row, col);
        if pivot.abs() < tol {
            return Err(LinalgError::Singular { col, pivot });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(pivot_row, j));
                lu.set(pivot_row, j, tmp);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let factor = lu.get(row, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col + 1..n {
                let v = lu.get(row, j) - factor * lu.get(col, j);
                lu.set(row, j, v);
            }
            x[row] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let partial: f64 = (i + 1..n).map(|j| lu.get(i, j) * x[j]).sum();
        x[i] = (x[i] - partial) / lu.get(i, i);
    }
    Ok(x)
}

/// Determinant via LU with partial pivoting; returns 0 when elimination
/// hits a zero pivot.
pub fn determinant(a: &Matrix) -> f64 {
    assert!(a.is_square(), "determinant needs a square matrix");
    let n = a.n_rows();
    let mut lu = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| lu.get(r, col).abs().total_cmp(&lu.get(s, col).abs()))
            .expect("non-empty pivot search");
        let pivot = lu.get(pivot_row, col);
        if pivot == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            det = -det;
            for j in 0..n {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(pivot_row, j));
                lu.set(pivot_row, j, tmp);
            }
        }
        det *= pivot;
        for row in col + 1..n {
            let factor = lu.get(row, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col + 1..n {
                let v = lu.get(row, j) - factor * lu.get(col, j);
                lu.set(row, j, v);
            }
        }
    }
    det
}
