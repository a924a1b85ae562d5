use crate::error::{LewisError, Result};
use crate::linalg::matrix::{dot, Matrix};

/// Relative pivot threshold below which a Gram matrix is declared singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Relative asymmetry allowed when constructing a [`QuadForm`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Pivoted Cholesky factorization `P^T M P = L L^T`.
///
/// `perm[k]` is the original index placed at position `k`.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    dim: usize,
    perm: Vec<usize>,
    lower: Vec<f64>,
}

impl PivotedCholesky {
    /// Factors a symmetric `dim x dim` row-major matrix. Fails when some pivot drops
    /// below [`RANK_TOLERANCE`] times the first (largest) pivot.
    pub fn factor(mat: &[f64], dim: usize) -> Result<Self> {
        assert_eq!(mat.len(), dim * dim);
        let d = dim;
        let mut a = mat.to_vec();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut largest = 0.0;
        for k in 0..d {
            let mut best = k;
            for j in k + 1..d {
                if a[j * d + j] > a[best * d + best] {
                    best = j;
                }
            }
            if best != k {
                for c in 0..d {
                    a.swap(k * d + c, best * d + c);
                }
                for r in 0..d {
                    a.swap(r * d + k, r * d + best);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * d + k];
            if k == 0 {
                largest = pivot;
            }
            let threshold = RANK_TOLERANCE * largest;
            if !pivot.is_finite() || !(pivot > threshold) || !(largest > 0.0) {
                return Err(LewisError::RankDeficient {
                    step: k,
                    pivot,
                    threshold,
                    rank: k,
                    dim: d,
                });
            }
            let lkk = pivot.sqrt();
            a[k * d + k] = lkk;
            for i in k + 1..d {
                a[i * d + k] /= lkk;
            }
            for i in k + 1..d {
                let lik = a[i * d + k];
                for j in k + 1..d {
                    a[i * d + j] -= lik * a[j * d + k];
                }
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                a[i * d + j] = 0.0;
            }
        }
        Ok(PivotedCholesky {
            dim: d,
            perm,
            lower: a,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L y = P^T b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y: Vec<f64> = self.perm.iter().map(|&k| b[k]).collect();
        for i in 0..d {
            let row = &self.lower[i * d..i * d + i];
            let s = y[i] - dot(row, &y[..i]);
            y[i] = s / self.lower[i * d + i];
        }
        y
    }

    /// `P L^{-T} y`, the second half of a solve.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = y.to_vec();
        for i in (0..d).rev() {
            let mut s = y[i];
            for j in i + 1..d {
                s -= self.lower[j * d + i] * y[j];
            }
            y[i] = s / self.lower[i * d + i];
        }
        let mut x = vec![0.0; d];
        for (k, &orig) in self.perm.iter().enumerate() {
            x[orig] = y[k];
        }
        x
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `b^T M^{-1} b = ||L^{-1} P^T b||^2`.
    pub fn inv_quad(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().map(|v| v * v).sum()
    }

    /// `C^T b` for the square-root factor `C = P L`, so `M = C C^T`.
    pub fn factor_t_apply(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let pb: Vec<f64> = self.perm.iter().map(|&k| b[k]).collect();
        (0..d)
            .map(|j| (j..d).map(|i| self.lower[i * d + j] * pb[i]).sum())
            .collect()
    }

    /// Dense square-root factor `C = P L` (row-major), so that `M = C C^T`.
    pub fn sqrt_factor(&self) -> Vec<f64> {
        let d = self.dim;
        let mut c = vec![0.0; d * d];
        for (k, &orig) in self.perm.iter().enumerate() {
            c[orig * d..(orig + 1) * d].copy_from_slice(&self.lower[k * d..(k + 1) * d]);
        }
        c
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
            * 2.0
    }
}

/// A symmetric positive-definite `d x d` matrix together with its factorization.
#[derive(Clone, Debug)]
pub struct QuadForm {
    dim: usize,
    matrix: Vec<f64>,
    chol: PivotedCholesky,
}

impl QuadForm {
    /// Builds a form from a row-major symmetric matrix. Small asymmetries (within
    /// [`SYMMETRY_TOLERANCE`] of the largest entry) are averaged away.
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim {
            return Err(LewisError::DimensionMismatch {
                expected: dim * dim,
                found: matrix.len(),
            });
        }
        if let Some(v) = matrix.iter().find(|v| !v.is_finite()) {
            return Err(LewisError::NonFinite(format!("quadratic form entry {v}")));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut m = matrix;
        for i in 0..dim {
            for j in i + 1..dim {
                let (a, b) = (m[i * dim + j], m[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(LewisError::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m[i * dim + j] = avg;
                m[j * dim + i] = avg;
            }
        }
        let chol = PivotedCholesky::factor(&m, dim)?;
        Ok(QuadForm {
            dim,
            matrix: m,
            chol,
        })
    }

    pub fn identity(dim: usize) -> Self {
        QuadForm::new(dim, Matrix::identity(dim).into_data()).expect("identity is positive definite")
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(LewisError::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        QuadForm::new(m.rows(), m.data().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn factorization(&self) -> &PivotedCholesky {
        &self.chol
    }

    /// `x^T M x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|i| x[i] * dot(&self.matrix[i * d..(i + 1) * d], x))
            .sum()
    }

    /// `x^T M^{-1} x` via one triangular solve.
    pub fn inv_quad(&self, x: &[f64]) -> f64 {
        self.chol.inv_quad(x)
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| dot(&self.matrix[i * d..(i + 1) * d], x)).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(LewisError::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        Ok(self.chol.solve(b))
    }

    pub fn inverse(&self) -> Result<QuadForm> {
        let d = self.dim;
        let mut inv = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.chol.solve(&e);
            for i in 0..d {
                inv[i * d + j] = col[i];
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                let avg = 0.5 * (inv[i * d + j] + inv[j * d + i]);
                inv[i * d + j] = avg;
                inv[j * d + i] = avg;
            }
        }
        QuadForm::new(d, inv)
    }

    pub fn scaled(&self, c: f64) -> Result<QuadForm> {
        if !(c > 0.0) {
            return Err(LewisError::invalid(format!("scale factor {c} must be positive")));
        }
        QuadForm::new(self.dim, self.matrix.iter().map(|v| v * c).collect())
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.matrix)
    }
}

/// `G = sum_i s_i a_i a_i^T` accumulated with deterministic chunking.
pub(crate) fn scaled_gram(a: &Matrix, scales: &[f64]) -> Vec<f64> {
    let d = a.cols();
    let lower = crate::par::chunked_reduce(
        a.rows(),
        || vec![0.0; d * d],
        |acc, i| {
            let r = a.row(i);
            let s = scales[i];
            for j in 0..d {
                let v = s * r[j];
                if v == 0.0 {
                    continue;
                }
                for k in 0..=j {
                    acc[j * d + k] += v * r[k];
                }
            }
        },
        |acc, part| acc.iter_mut().zip(part).for_each(|(x, y)| *x += y),
    );
    let mut g = lower;
    for j in 0..d {
        for k in 0..j {
            g[k * d + j] = g[j * d + k];
        }
    }
    g
}
