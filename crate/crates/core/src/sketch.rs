//! Randomized leverage-score and quadratic-form estimates from Gaussian probes.
//!
//! For a factor `C` of the relevant form, each row is mapped to
//! `(1/k) ||Pi C^T a_i||^2` where `Pi` is a `k x d` standard Gaussian matrix
//! drawn once from the seed and shared by all rows. The estimate is unbiased
//! and concentrates multiplicatively as `k` grows.

use crate::error::{LewisError, Result};
use crate::generate::{gaussian_vec, stream_rng};
use crate::linalg::{
    check_exponent, check_weights, dot, reject_zero_rows, weight_powers, weighted_gram,
    weighted_leverage, Matrix, QuadForm, WeightVector,
};
use crate::par;

/// Smallest probe count produced by [`SketchConfig::for_beta`].
pub const MIN_PROBES: usize = 64;
/// Largest probe count produced by [`SketchConfig::for_beta`].
pub const MAX_PROBES: usize = 8192;

const PROBE_STREAM: u64 = 0x5eed_0001;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchConfig {
    /// Target multiplicative accuracy; `1.0` requests exact scores.
    pub beta: f64,
    pub seed: u64,
    pub probe_count: usize,
}

impl SketchConfig {
    pub fn new(beta: f64, probe_count: usize, seed: u64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(LewisError::invalid(format!("beta = {beta} must be a finite value >= 1")));
        }
        if probe_count == 0 {
            return Err(LewisError::invalid("probe_count must be positive"));
        }
        Ok(SketchConfig {
            beta,
            seed,
            probe_count,
        })
    }

    /// Config whose probe count follows `k = ceil(32 ln n / (ln beta)^2)`,
    /// clamped to `[MIN_PROBES, MAX_PROBES]`.
    pub fn for_beta(beta: f64, n: usize, seed: u64) -> Result<Self> {
        SketchConfig::new(beta, 1, seed)?;
        SketchConfig::new(beta, Self::probe_count_for(beta, n), seed)
    }

    pub fn probe_count_for(beta: f64, n: usize) -> usize {
        let lb = beta.ln();
        if lb <= 0.0 {
            return MAX_PROBES;
        }
        let k = (32.0 * (n.max(2) as f64).ln() / (lb * lb)).ceil();
        (k as usize).clamp(MIN_PROBES, MAX_PROBES)
    }

    /// `beta == 1` bypasses sketching entirely.
    pub fn is_exact(&self) -> bool {
        self.beta == 1.0
    }

    fn probes(&self, d: usize) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(self.seed, PROBE_STREAM);
        (0..self.probe_count)
            .map(|_| gaussian_vec(&mut rng, d))
            .collect()
    }
}

/// `(1/k) sum_j (z_j . a_i)^2` for every row, with `z_j` the mapped probes.
fn probe_norms(a: &Matrix, mapped: &[Vec<f64>]) -> Vec<f64> {
    let k = mapped.len() as f64;
    par::map_indexed(a.rows(), |i| {
        let r = a.row(i);
        mapped.iter().map(|z| dot(z, r).powi(2)).sum::<f64>() / k
    })
}

/// Approximate leverage scores of `W^{1/2-1/p} A`.
///
/// With `beta == 1` this is exactly [`weighted_leverage`]. Otherwise the Gram
/// factor `G = P L L^T P^T` maps each probe to `P L^{-T} pi_j`, giving
/// `tau~_i = w_i^{1-2/p} (1/k) ||Pi L^{-1} P^T a_i||^2`.
pub fn leverage_scores_approx(
    a: &Matrix,
    w: &WeightVector,
    p: f64,
    cfg: &SketchConfig,
) -> Result<WeightVector> {
    if cfg.is_exact() {
        return weighted_leverage(a, w, p);
    }
    check_exponent(p)?;
    check_weights(a, w)?;
    reject_zero_rows(a)?;
    let g = weighted_gram(a, w, p)?;
    let chol = g.factorization();
    let mapped: Vec<Vec<f64>> = cfg
        .probes(a.cols())
        .iter()
        .map(|pi| chol.backward(pi))
        .collect();
    let scales = weight_powers(w, 1.0 - 2.0 / p)?;
    let est = probe_norms(a, &mapped);
    WeightVector::new(est.iter().zip(&scales).map(|(e, s)| e * s).collect())
}

/// Estimates `u_i ~ a_i^T Q a_i` for every row from probes of the square-root
/// factor `Q = C C^T`: `u_i = (1/k) ||Pi C^T a_i||^2`.
pub fn quad_form_probe(q: &QuadForm, a: &Matrix, cfg: &SketchConfig) -> Result<WeightVector> {
    if q.dim() != a.cols() {
        return Err(LewisError::DimensionMismatch {
            expected: a.cols(),
            found: q.dim(),
        });
    }
    reject_zero_rows(a)?;
    if cfg.is_exact() {
        return WeightVector::new(crate::linalg::quadratic_forms(a, q)?);
    }
    let d = a.cols();
    let c = q.factorization().sqrt_factor();
    let mapped: Vec<Vec<f64>> = cfg
        .probes(d)
        .iter()
        .map(|pi| (0..d).map(|r| dot(&c[r * d..(r + 1) * d], pi)).collect())
        .collect();
    WeightVector::new(probe_norms(a, &mapped))
}
