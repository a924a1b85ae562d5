//! Fixed-point computation of l_p Lewis weights for `1 <= p < 4`.
//!
//! One step maps weights `w` to `(a_i^T (A^T W^{1-2/p} A)^{-1} a_i)^{p/2}`,
//! which is a contraction by `|p/2 - 1|` in the log-infinity metric. Starting
//! from all ones, `ceil(ln(2/theta) / (1 - |p/2 - 1|))` steps give weights within
//! `n^theta` of the true ones.

use crate::error::{LewisError, Result};
use crate::generate::mix_seed;
use crate::linalg::{
    check_exponent, check_weights, inverse_quadratic_forms, leverage_scores_exact,
    reject_zero_rows, weight_powers, weighted_gram, Matrix, QuadForm, WeightVector,
};
use crate::sketch::{leverage_scores_approx, SketchConfig};

/// Weights are clamped from below at this value; see [`LewisResult::clamped_rows`].
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterConfig {
    pub p: f64,
    pub beta: f64,
    pub theta: f64,
    /// Replaces the computed iteration budget when set.
    pub max_iterations: Option<usize>,
}

impl IterConfig {
    pub fn new(p: f64, theta: f64) -> Result<Self> {
        let cfg = IterConfig {
            p,
            beta: 1.0,
            theta,
            max_iterations: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, t: usize) -> Result<Self> {
        self.max_iterations = Some(t);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(LewisError::UnsupportedExponent {
                p: self.p,
                hint: "the iterative solver accepts 1 <= p < 4",
            });
        }
        if self.p >= 4.0 || !self.p.is_finite() {
            return Err(LewisError::UnsupportedExponent {
                p: self.p,
                hint: "the fixed-point iteration needs p < 4; use the convex solver",
            });
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(LewisError::invalid(format!("beta = {} must be >= 1", self.beta)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(LewisError::invalid(format!(
                "theta = {} must lie in (0, 1]",
                self.theta
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(LewisError::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LewisResult {
    pub weights: WeightVector,
    pub iterations_used: usize,
    /// Almost-Lewis factor of `weights` (>= 1).
    pub final_residual: f64,
    /// `(A^T W^{1-2/p} A)^{-1}` at the returned weights.
    pub gram_inverse: QuadForm,
    /// Upper bound on the log-infinity distance to the true weights implied by
    /// `final_residual`: `(p/2) ln(residual) / (1 - |p/2 - 1|)`.
    pub distance_bound: f64,
    /// Rows whose weight was raised to [`WEIGHT_FLOOR`].
    pub clamped_rows: usize,
}

/// `|p/2 - 1|`, the contraction factor of one exact step.
pub fn contraction_rate(p: f64) -> f64 {
    (p / 2.0 - 1.0).abs()
}

/// Iteration budget `T = ceil(ln(2/theta) / (1 - |p/2 - 1|))`.
pub fn iteration_count(p: f64, theta: f64) -> Result<usize> {
    if !(p > 0.0) || p >= 4.0 || !p.is_finite() {
        return Err(LewisError::UnsupportedExponent {
            p,
            hint: "the iteration budget is finite only for 0 < p < 4; use the convex solver",
        });
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(LewisError::invalid(format!("theta = {theta} must lie in (0, 1]")));
    }
    let t = ((2.0 / theta).ln() / (1.0 - contraction_rate(p))).ceil();
    Ok((t as usize).max(1))
}

pub(crate) fn almost_lewis_from_forms(forms: &[f64], w: &WeightVector, p: f64) -> f64 {
    let worst = forms
        .iter()
        .zip(w.as_slice())
        .map(|(q, wi)| (q.ln() - (2.0 / p) * wi.ln()).abs())
        .fold(0.0, f64::max);
    worst.exp()
}

/// Smallest `alpha >= 1` with `a_i^T (A^T W^{1-2/p} A)^{-1} a_i ~_alpha w_i^{2/p}` for all rows.
pub fn almost_lewis_residual(a: &Matrix, w: &WeightVector, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_weights(a, w)?;
    reject_zero_rows(a)?;
    let g = weighted_gram(a, w, p)?;
    let forms = inverse_quadratic_forms(a, &g)?;
    Ok(almost_lewis_from_forms(&forms, w, p))
}

fn clamp_weights(values: Vec<f64>) -> (WeightVector, usize) {
    let mut clamped = 0;
    let values = values
        .into_iter()
        .map(|v| {
            if v < WEIGHT_FLOOR {
                clamped += 1;
                WEIGHT_FLOOR
            } else {
                v
            }
        })
        .collect();
    let w = WeightVector::new(values).expect("clamped weights are positive");
    (w, clamped)
}

/// One step: `w_i <- (w_i^{2/p-1} tau~_i)^{p/2}` with `tau~` the (approximate)
/// leverage scores of `W^{1/2-1/p} A`. With `beta == 1` this is
/// `(a_i^T (A^T W^{1-2/p} A)^{-1} a_i)^{p/2}` exactly.
pub fn lewis_iterate(
    a: &Matrix,
    p: f64,
    beta: f64,
    w: &WeightVector,
    seed: u64,
) -> Result<WeightVector> {
    check_exponent(p)?;
    check_weights(a, w)?;
    reject_zero_rows(a)?;
    if beta == 1.0 {
        let g = weighted_gram(a, w, p)?;
        let forms = inverse_quadratic_forms(a, &g)?;
        return Ok(clamp_weights(forms.iter().map(|q| q.powf(p / 2.0)).collect()).0);
    }
    let cfg = SketchConfig::for_beta(beta, a.rows(), seed)?;
    let tau = leverage_scores_approx(a, w, p, &cfg)?;
    let inv_scale = weight_powers(w, 2.0 / p - 1.0)?;
    Ok(clamp_weights(
        tau.as_slice()
            .iter()
            .zip(&inv_scale)
            .map(|(t, s)| (t * s).powf(p / 2.0))
            .collect(),
    )
    .0)
}

/// Lewis weights by iterating from all ones.
///
/// Runs at most `iteration_count(p, theta)` steps (or `max_iterations`) and stops
/// early once the almost-Lewis residual reaches `1 + theta/4`.
pub fn approx_lewis_weights(a: &Matrix, cfg: &IterConfig, seed: u64) -> Result<LewisResult> {
    cfg.validate()?;
    reject_zero_rows(a)?;
    let p = cfg.p;
    let budget = match cfg.max_iterations {
        Some(t) => t,
        None => iteration_count(p, cfg.theta)?,
    };
    let stop_at = 1.0 + cfg.theta / 4.0;
    let rate = contraction_rate(p);

    if p == 2.0 {
        let weights = leverage_scores_exact(a)?;
        return finish(a, weights, p, 1, 0, rate);
    }

    let mut w = WeightVector::ones(a.rows());
    let mut g = weighted_gram(a, &w, p)?;
    let mut forms = inverse_quadratic_forms(a, &g)?;
    let mut clamped = 0;
    let mut used = 0;
    while used < budget {
        let next = if cfg.beta == 1.0 {
            clamp_weights(forms.iter().map(|q| q.powf(p / 2.0)).collect())
        } else {
            let step = lewis_iterate(a, p, cfg.beta, &w, mix_seed(seed, used as u64))?;
            clamp_weights(step.into_vec())
        };
        w = next.0;
        clamped = next.1;
        used += 1;
        g = weighted_gram(a, &w, p)?;
        forms = inverse_quadratic_forms(a, &g)?;
        if almost_lewis_from_forms(&forms, &w, p) <= stop_at {
            break;
        }
    }
    let residual = almost_lewis_from_forms(&forms, &w, p);
    Ok(LewisResult {
        distance_bound: distance_bound(residual, p, rate),
        gram_inverse: g.inverse()?,
        weights: w,
        iterations_used: used,
        final_residual: residual,
        clamped_rows: clamped,
    })
}

fn distance_bound(residual: f64, p: f64, rate: f64) -> f64 {
    (p / 2.0) * residual.ln() / (1.0 - rate)
}

fn finish(
    a: &Matrix,
    weights: WeightVector,
    p: f64,
    used: usize,
    clamped: usize,
    rate: f64,
) -> Result<LewisResult> {
    let g = weighted_gram(a, &weights, p)?;
    let forms = inverse_quadratic_forms(a, &g)?;
    let residual = almost_lewis_from_forms(&forms, &weights, p);
    Ok(LewisResult {
        distance_bound: distance_bound(residual, p, rate),
        gram_inverse: g.inverse()?,
        weights,
        iterations_used: used,
        final_residual: residual,
        clamped_rows: clamped,
    })
}
