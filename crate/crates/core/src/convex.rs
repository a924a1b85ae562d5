//! Lewis weights for `p >= 2` through determinant maximization.
//!
//! The program `max log det M  s.t.  sum_i (a_i^T M a_i)^{p/2} <= d` has a unique
//! optimum `M*` whose weights `w_i = (a_i^T M* a_i)^{p/2}` are the Lewis weights.
//! The constraint is homogeneous in `M`, so we maximize the scale-invariant
//!
//! ```text
//! F(M) = log det M - (2d/p) ln sum_i (a_i^T M a_i)^{p/2}
//! ```
//!
//! and rescale onto the constraint surface after every step. Each step moves the
//! square-root factor `M = C C^T` to `C (I + t X / 2)`, where
//! `X = I - sum_i u_i^{p/2-1} (C^T a_i)(C^T a_i)^T` is the gradient of `F` in the
//! whitened basis, with an Armijo backtracking search on `t`. Results are
//! certified by the almost-Lewis residual, which does not depend on the solver.

use crate::error::{LewisError, Result};
use crate::generate::{gaussian_vec, stream_rng};
use crate::iterative::almost_lewis_residual;
use crate::linalg::{
    check_exponent, check_weights, dot, reject_zero_rows, weighted_gram, Matrix, QuadForm,
    WeightVector,
};
use crate::par;

/// Gradient norms below `GRADIENT_FLOOR * d` are treated as converged regardless
/// of the requested tolerance; smaller values are below rounding noise.
pub const GRADIENT_FLOOR: f64 = 1e-11;

const INIT_STREAM: u64 = 0xc0_4e_e4;
const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 2.0;
const MIN_STEP: f64 = 1e-14;
const ROUNDOFF: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexConfig {
    pub p: f64,
    /// Target relative accuracy `eps`: success requires certificate `<= 1 + eps`.
    pub tolerance: f64,
    pub max_ascent_steps: usize,
    /// `None` starts from `(A^T A)^{-1}`; `Some(seed)` perturbs that start randomly.
    pub seed: Option<u64>,
}

impl ConvexConfig {
    pub fn new(p: f64, tolerance: f64) -> Result<Self> {
        let cfg = ConvexConfig {
            p,
            tolerance,
            max_ascent_steps: 10_000,
            seed: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(LewisError::UnsupportedExponent {
                p: self.p,
                hint: "the convex solver needs p >= 2; use the iterative solver",
            });
        }
        if !(self.tolerance > 0.0 && self.tolerance < 0.5) {
            return Err(LewisError::invalid(format!(
                "tolerance = {} must lie in (0, 0.5)",
                self.tolerance
            )));
        }
        if self.max_ascent_steps == 0 {
            return Err(LewisError::invalid("max_ascent_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ConvexSolution {
    /// The optimal form `M*`, scaled so the constraint is tight.
    pub form: QuadForm,
    pub weights: WeightVector,
    /// Almost-Lewis residual of `weights`.
    pub certificate: f64,
    pub steps: usize,
    /// Frobenius norm of the whitened gradient at the returned form.
    pub gradient_norm: f64,
}

/// `w_i = (a_i^T Q a_i)^{p/2}`, no normalization.
pub fn weights_from_form(a: &Matrix, q: &QuadForm, p: f64) -> Result<WeightVector> {
    check_exponent(p)?;
    reject_zero_rows(a)?;
    let forms = crate::linalg::quadratic_forms(a, q)?;
    WeightVector::new(forms.iter().map(|u| u.powf(p / 2.0)).collect())
}

/// Whether `w` is `alpha`-almost Lewis for `A`.
pub fn certify_form(a: &Matrix, w: &WeightVector, p: f64, alpha: f64) -> Result<bool> {
    Ok(almost_lewis_residual(a, w, p)? <= alpha)
}

/// `F(M) = log det M - (2d/p) ln sum_i (a_i^T M a_i)^{p/2}`.
pub fn determinant_objective(a: &Matrix, m: &QuadForm, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let forms = crate::linalg::quadratic_forms(a, m)?;
    let s: f64 = forms.iter().map(|u| u.powf(p / 2.0)).sum();
    Ok(m.log_det() - 2.0 * a.cols() as f64 / p * s.ln())
}

/// Rescales `M` so that `sum_i (a_i^T M a_i)^{p/2} = d`.
pub fn saturate(a: &Matrix, m: &QuadForm, p: f64) -> Result<QuadForm> {
    check_exponent(p)?;
    let forms = crate::linalg::quadratic_forms(a, m)?;
    let s: f64 = forms.iter().map(|u| u.powf(p / 2.0)).sum();
    m.scaled((a.cols() as f64 / s).powf(2.0 / p))
}

/// Rows mapped through the factor: `b_i = C^T a_i`, stored row-major `n x d`.
fn whiten_rows(a: &Matrix, c: &[f64]) -> Vec<Vec<f64>> {
    let d = a.cols();
    par::map_indexed(a.rows(), |i| {
        let r = a.row(i);
        (0..d)
            .map(|j| (0..d).map(|k| c[k * d + j] * r[k]).sum())
            .collect()
    })
}

/// `sum_i |K^T b_i|^p` with `|.|` Euclidean; the constraint sum after moving by `K`.
fn power_sum(b: &[Vec<f64>], k: &[f64], d: usize, p: f64) -> f64 {
    par::sum_indexed(b.len(), |i| {
        let bi = &b[i];
        let u: f64 = (0..d)
            .map(|j| {
                let v: f64 = (0..d).map(|l| k[l * d + j] * bi[l]).sum();
                v * v
            })
            .sum();
        u.powf(p / 2.0)
    })
}

fn mat_mul(x: &[f64], y: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for l in 0..d {
            let v = x[i * d + l];
            for j in 0..d {
                out[i * d + j] += v * y[l * d + j];
            }
        }
    }
    out
}

fn mat_mul_t(x: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = dot(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
        }
    }
    out
}

fn initial_form(a: &Matrix, cfg: &ConvexConfig) -> Result<QuadForm> {
    let d = a.cols();
    let m0 = weighted_gram(a, &WeightVector::ones(a.rows()), 2.0)?.inverse()?;
    let Some(seed) = cfg.seed else {
        return Ok(m0);
    };
    let mut rng = stream_rng(seed, INIT_STREAM);
    let sigma = 0.3 / (d as f64).sqrt();
    let mut k = gaussian_vec(&mut rng, d * d);
    k.iter_mut().for_each(|v| *v *= sigma);
    for i in 0..d {
        k[i * d + i] += 1.0;
    }
    let c = m0.factorization().sqrt_factor();
    let ck = mat_mul(&c, &k, d);
    QuadForm::new(d, mat_mul_t(&ck, d))
}

struct Point {
    form: QuadForm,
    factor: Vec<f64>,
    whitened: Vec<Vec<f64>>,
    objective: f64,
}

impl Point {
    fn new(a: &Matrix, form: QuadForm, p: f64) -> Result<Self> {
        let form = saturate(a, &form, p)?;
        let factor = form.factorization().sqrt_factor();
        let whitened = whiten_rows(a, &factor);
        let d = a.cols() as f64;
        // Saturated, so the constraint sum equals d.
        let objective = form.log_det() - 2.0 * d / p * d.ln();
        Ok(Point {
            form,
            factor,
            whitened,
            objective,
        })
    }

    fn squared_norms(&self) -> Vec<f64> {
        self.whitened.iter().map(|b| dot(b, b)).collect()
    }

    /// Whitened gradient `X = I - sum_i u_i^{p/2-1} b_i b_i^T`.
    fn gradient(&self, d: usize, p: f64) -> Vec<f64> {
        let u = self.squared_norms();
        let mut x = par::chunked_reduce(
            self.whitened.len(),
            || vec![0.0; d * d],
            |acc, i| {
                let b = &self.whitened[i];
                let s = u[i].powf(p / 2.0 - 1.0);
                for j in 0..d {
                    let v = s * b[j];
                    for l in 0..d {
                        acc[j * d + l] -= v * b[l];
                    }
                }
            },
            |acc, part| acc.iter_mut().zip(part).for_each(|(x, y)| *x += y),
        );
        for j in 0..d {
            x[j * d + j] += 1.0;
        }
        for j in 0..d {
            for l in j + 1..d {
                let avg = 0.5 * (x[j * d + l] + x[l * d + j]);
                x[j * d + l] = avg;
                x[l * d + j] = avg;
            }
        }
        x
    }

    fn weights(&self, p: f64) -> Result<WeightVector> {
        WeightVector::new(self.squared_norms().iter().map(|u| u.powf(p / 2.0)).collect())
    }
}

/// Solves the determinant-maximization program and certifies the resulting weights.
pub fn lewis_quadratic_form(a: &Matrix, cfg: &ConvexConfig) -> Result<ConvexSolution> {
    cfg.validate()?;
    reject_zero_rows(a)?;
    let (n, d) = (a.rows(), a.cols());
    if n < d {
        return Err(LewisError::invalid(format!(
            "matrix has {n} rows and {d} columns; need n >= d"
        )));
    }
    let p = cfg.p;
    let df = d as f64;
    // The residual of row i is b_i^T (I - X)^{-1} b_i / |b_i|^2, so |X| ~ tol matches the certificate.
    let grad_tol = cfg.tolerance.max(GRADIENT_FLOOR * df);

    let mut point = Point::new(a, initial_form(a, cfg)?, p)?;
    let mut step: f64 = 1.0;
    let mut best_certificate = f64::INFINITY;

    for steps in 0..=cfg.max_ascent_steps {
        let x = point.gradient(d, p);
        let gnorm2: f64 = x.iter().map(|v| v * v).sum();
        let gnorm = gnorm2.sqrt();
        let weights = point.weights(p)?;
        let mut stalled = false;

        if gnorm <= grad_tol || steps == cfg.max_ascent_steps {
            let certificate = almost_lewis_residual(a, &weights, p)?;
            best_certificate = best_certificate.min(certificate);
            if gnorm <= grad_tol && certificate <= 1.0 + cfg.tolerance {
                return Ok(ConvexSolution {
                    form: point.form,
                    weights,
                    certificate,
                    steps,
                    gradient_norm: gnorm,
                });
            }
            if steps == cfg.max_ascent_steps {
                break;
            }
        }

        // Backtracking along K(t) = I + (t/2) X.
        let mut t = (2.0 * step).min(MAX_STEP);
        loop {
            let mut k = x.iter().map(|v| 0.5 * t * v).collect::<Vec<_>>();
            for j in 0..d {
                k[j * d + j] += 1.0;
            }
            let ck = mat_mul(&point.factor, &k, d);
            if let Ok(form) = QuadForm::new(d, mat_mul_t(&ck, d)) {
                let s = power_sum(&point.whitened, &k, d, p);
                let objective = form.log_det() - 2.0 * df / p * s.ln();
                if objective.is_finite() && objective >= point.objective + ARMIJO * t * gnorm2 {
                    point = Point::new(a, form, p)?;
                    step = t;
                    break;
                }
                // Near the optimum the sufficient increase is below the resolution of the
                // objective; fall back to requiring a smaller gradient.
                let noise = ROUNDOFF * (1.0 + point.objective.abs());
                if objective.is_finite() && (objective - point.objective).abs() <= noise {
                    let candidate = Point::new(a, form, p)?;
                    let g2: f64 = candidate.gradient(d, p).iter().map(|v| v * v).sum();
                    if g2 < gnorm2 {
                        point = candidate;
                        step = t;
                        break;
                    }
                }
            }
            t *= 0.5;
            if t < MIN_STEP {
                stalled = true;
                break;
            }
        }
        if stalled {
            let certificate = almost_lewis_residual(a, &weights, p)?;
            best_certificate = best_certificate.min(certificate);
            if certificate <= 1.0 + cfg.tolerance {
                return Ok(ConvexSolution {
                    form: point.form,
                    weights,
                    certificate,
                    steps,
                    gradient_norm: gnorm,
                });
            }
            return Err(LewisError::NonConvergence {
                steps,
                certificate: best_certificate,
            });
        }
    }
    Err(LewisError::NonConvergence {
        steps: cfg.max_ascent_steps,
        certificate: best_certificate,
    })
}

/// Angle (radians) between `vec(M^{-1})` and `vec(A^T W^{1-2/p} A)`; zero at the optimum.
pub fn lagrange_angle(a: &Matrix, m: &QuadForm, w: &WeightVector, p: f64) -> Result<f64> {
    check_weights(a, w)?;
    let inv = m.inverse()?;
    let g = weighted_gram(a, w, p)?;
    let num = dot(inv.matrix(), g.matrix());
    let den = dot(inv.matrix(), inv.matrix()).sqrt() * dot(g.matrix(), g.matrix()).sqrt();
    Ok((num / den).clamp(-1.0, 1.0).acos())
}
