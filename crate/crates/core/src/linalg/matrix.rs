use crate::error::{LewisError, Result};

/// Dense row-major real matrix with finite entries.
///
/// Tall matrices (`rows >= cols`) are the expected input for every solver, but
/// the shape is not enforced here: rank is checked when a Gram matrix is factored.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LewisError::invalid(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LewisError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(LewisError::NonFinite(format!(
                "entry ({}, {}) is {}",
                k / cols,
                k % cols,
                data[k]
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(LewisError::invalid(format!(
                    "row {i} has {} entries, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(n, d, data)
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        Matrix {
            rows: d,
            cols: d,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Index of the first row whose entries are all zero.
    pub fn first_zero_row(&self) -> Option<usize> {
        self.row_iter().position(|r| r.iter().all(|&v| v == 0.0))
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(LewisError::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let out = &mut data[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Matrix::new(n, m, data)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length must match column count");
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// Sum over rows of `|a_i . x|^p`.
    pub fn norm_pow(&self, x: &[f64], p: f64) -> f64 {
        assert_eq!(x.len(), self.cols, "vector length must match column count");
        self.row_iter().map(|r| abs_pow(dot(r, x), p)).sum()
    }

    /// `||A x||_p`.
    pub fn norm(&self, x: &[f64], p: f64) -> f64 {
        self.norm_pow(x, p).powf(1.0 / p)
    }

    /// Multiplies row `i` by `scales[i]`.
    pub fn scale_rows(&self, scales: &[f64]) -> Result<Matrix> {
        if scales.len() != self.rows {
            return Err(LewisError::DimensionMismatch {
                expected: self.rows,
                found: scales.len(),
            });
        }
        let mut data = self.data.clone();
        for (row, &s) in data.chunks_exact_mut(self.cols).zip(scales) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn scaled(&self, c: f64) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    /// New matrix made of the listed rows, in order. Panics on out-of-range indices.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if other.cols != self.cols {
            return Err(LewisError::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::new(self.rows + other.rows, self.cols, data)
    }
}

/// `|v|^p` with exact fast paths for `p = 1` and `p = 2`.
#[inline]
pub fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v.abs()
    } else if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
