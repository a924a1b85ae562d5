//! Dense linear-algebra substrate: weighted Gram matrices, SPD solves, leverage
//! scores and the reweighting `A -> W^{1/2 - 1/p} A`.
//!
//! All leverage computations go through a pivoted Cholesky factor of the Gram
//! matrix and one triangular solve per row; there is no SVD path.

mod matrix;
mod quad;
mod weights;

pub use matrix::{abs_pow, dot, Matrix};
pub use quad::{PivotedCholesky, QuadForm, RANK_TOLERANCE, SYMMETRY_TOLERANCE};
pub use weights::WeightVector;

pub(crate) use quad::scaled_gram;

use crate::error::{LewisError, Result};
use crate::par;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(LewisError::invalid(format!("norm exponent p = {p} must be positive and finite")))
    }
}

pub(crate) fn check_weights(a: &Matrix, w: &WeightVector) -> Result<()> {
    if w.len() != a.rows() {
        return Err(LewisError::DimensionMismatch {
            expected: a.rows(),
            found: w.len(),
        });
    }
    Ok(())
}

pub(crate) fn reject_zero_rows(a: &Matrix) -> Result<()> {
    match a.first_zero_row() {
        Some(i) => Err(LewisError::invalid(format!(
            "row {i} is identically zero and has no positive weight"
        ))),
        None => Ok(()),
    }
}

/// `w_i^e` for every row, failing if any power overflows or underflows to a non-finite value.
pub(crate) fn weight_powers(w: &WeightVector, e: f64) -> Result<Vec<f64>> {
    let out: Vec<f64> = w.as_slice().iter().map(|v| v.powf(e)).collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(LewisError::NonFinite(format!(
            "weight power w[{i}]^{e} = {} is not a positive finite number",
            out[i]
        )));
    }
    Ok(out)
}

/// The Gram matrix `A^T W^{1-2/p} A` (not inverted).
pub fn weighted_gram(a: &Matrix, w: &WeightVector, p: f64) -> Result<QuadForm> {
    check_exponent(p)?;
    check_weights(a, w)?;
    let scales = weight_powers(w, 1.0 - 2.0 / p)?;
    QuadForm::new(a.cols(), scaled_gram(a, &scales))
}

/// `a_i^T G^{-1} a_i` for every row.
pub fn inverse_quadratic_forms(a: &Matrix, g: &QuadForm) -> Result<Vec<f64>> {
    if g.dim() != a.cols() {
        return Err(LewisError::DimensionMismatch {
            expected: a.cols(),
            found: g.dim(),
        });
    }
    let chol = g.factorization();
    Ok(par::map_indexed(a.rows(), |i| chol.inv_quad(a.row(i))))
}

/// `a_i^T Q a_i` for every row, computed directly.
pub fn quadratic_forms(a: &Matrix, q: &QuadForm) -> Result<Vec<f64>> {
    if q.dim() != a.cols() {
        return Err(LewisError::DimensionMismatch {
            expected: a.cols(),
            found: q.dim(),
        });
    }
    Ok(par::map_indexed(a.rows(), |i| q.quad(a.row(i))))
}

/// Statistical leverage scores `tau_i = a_i^T (A^T A)^{-1} a_i`.
pub fn leverage_scores_exact(a: &Matrix) -> Result<WeightVector> {
    weighted_leverage(a, &WeightVector::ones(a.rows()), 2.0)
}

/// Leverage scores of the reweighted matrix `W^{1/2-1/p} A`:
/// `tau_i = w_i^{1-2/p} a_i^T (A^T W^{1-2/p} A)^{-1} a_i`.
pub fn weighted_leverage(a: &Matrix, w: &WeightVector, p: f64) -> Result<WeightVector> {
    reject_zero_rows(a)?;
    let g = weighted_gram(a, w, p)?;
    let scales = weight_powers(w, 1.0 - 2.0 / p)?;
    let q = inverse_quadratic_forms(a, &g)?;
    WeightVector::new(q.iter().zip(&scales).map(|(qi, s)| qi * s).collect())
}

/// Row `i` of the output is `w_i^{1/2 - 1/p} a_i`.
pub fn reweighted_matrix(a: &Matrix, w: &WeightVector, p: f64) -> Result<Matrix> {
    check_exponent(p)?;
    check_weights(a, w)?;
    let scales = weight_powers(w, 0.5 - 1.0 / p)?;
    a.scale_rows(&scales)
}

/// Solves `G x = b` through the cached factorization.
pub fn spd_solve(g: &QuadForm, b: &[f64]) -> Result<Vec<f64>> {
    g.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gaussian_matrix;

    #[test]
    fn gram_identity_cases() {
        let i2 = Matrix::identity(2);
        let g = weighted_gram(&i2, &WeightVector::ones(2), 1.0).unwrap();
        assert_eq!(g.matrix(), &[1.0, 0.0, 0.0, 1.0]);
        let w = WeightVector::new(vec![4.0, 1.0]).unwrap();
        let g = weighted_gram(&i2, &w, 1.0).unwrap();
        assert_eq!(g.matrix(), &[0.25, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn gram_with_unit_weights_is_ata() {
        let a = gaussian_matrix(6, 3, 11);
        let ata = a.transpose().matmul(&a).unwrap();
        for p in [1.0, 1.5, 3.0, 7.0] {
            let g = weighted_gram(&a, &WeightVector::ones(6), p).unwrap();
            for (x, y) in g.matrix().iter().zip(ata.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_rank_deficiency_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [-1.0, -2.0]]).unwrap();
        let err = weighted_gram(&a, &WeightVector::ones(3), 1.0).unwrap_err();
        assert!(matches!(err, LewisError::RankDeficient { rank: 1, dim: 2, .. }));
        assert!(leverage_scores_exact(&a).is_err());
    }

    #[test]
    fn gram_non_finite_power() {
        let a = Matrix::identity(2);
        let w = WeightVector::new(vec![1e-300, 1.0]).unwrap();
        assert!(matches!(
            weighted_gram(&a, &w, 0.1),
            Err(LewisError::NonFinite(_))
        ));
    }

    #[test]
    fn leverage_identity_and_duplicate() {
        let lev = leverage_scores_exact(&Matrix::identity(4)).unwrap();
        assert!(lev.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let two = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let lev = leverage_scores_exact(&two).unwrap();
        assert!(lev.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn leverage_sums_to_rank() {
        let a = gaussian_matrix(100, 5, 3);
        let lev = leverage_scores_exact(&a).unwrap();
        assert!((lev.sum() - 5.0).abs() < 1e-10);
        assert!(lev.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
    }

    #[test]
    fn weighted_leverage_cases() {
        let a = gaussian_matrix(30, 4, 5);
        let w = WeightVector::new((0..30).map(|i| 0.5 + i as f64 / 10.0).collect()).unwrap();
        let at2 = weighted_leverage(&a, &w, 2.0).unwrap();
        let exact = leverage_scores_exact(&a).unwrap();
        assert_eq!(at2, exact);

        let id = Matrix::identity(3);
        let w = WeightVector::new(vec![0.1, 5.0, 2.0]).unwrap();
        for p in [1.0, 3.0, 6.0] {
            let t = weighted_leverage(&id, &w, p).unwrap();
            assert!(t.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }

        let dup = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let w = WeightVector::new(vec![0.5, 0.5, 1.0]).unwrap();
        let t = weighted_leverage(&dup, &w, 1.0).unwrap();
        for (x, y) in t.as_slice().iter().zip([0.5, 0.5, 1.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn reweighting_cases() {
        let a = gaussian_matrix(5, 2, 9);
        let w = WeightVector::new(vec![4.0, 2.0, 3.0, 0.5, 1.0]).unwrap();
        assert_eq!(reweighted_matrix(&a, &w, 2.0).unwrap(), a);
        assert_eq!(reweighted_matrix(&a, &WeightVector::ones(5), 1.3).unwrap(), a);
        let b = reweighted_matrix(&a, &w, 1.0).unwrap();
        for j in 0..2 {
            assert!((b.get(0, j) - 0.5 * a.get(0, j)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_row_rejected() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            leverage_scores_exact(&a),
            Err(LewisError::InvalidInput(_))
        ));
    }
}
