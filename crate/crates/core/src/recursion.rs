//! Recursive approximation of the Lewis quadratic form `(A^T W^{1-2/p} A)^{-1}`.
//!
//! Each level keeps a uniform half of the rows, recurses on it to get a form
//! `Q^`, estimates `u_i ~ a_i^T Q^ a_i` with Gaussian probes, keeps row `i` with
//! probability `p_i = min(1, f(p) n^{theta/2} d^{p/2} ln d u_i^{p/2})` (scaled by
//! `p_i^{-1/p}`), and solves the kept rows exactly. The returned form is within
//! a factor 2 of the true one with high probability, while the exact solver only
//! ever sees a sample whose size does not grow with `n` beyond `n^{theta/2}`.

use rand::seq::index::sample;

use crate::convex::{lewis_quadratic_form, ConvexConfig};
use crate::error::{LewisError, Result};
use crate::generate::{mix_seed, stream_rng};
use crate::iterative::{approx_lewis_weights, IterConfig};
use crate::linalg::{reject_zero_rows, Matrix, QuadForm, WeightVector};
use crate::par;
use crate::sketch::{quad_form_probe, SketchConfig};

const HALVE_STREAM: u64 = 0x4a1f;
const PROBE_STREAM: u64 = 0x9b0e;
const KEEP_STREAM: u64 = 0x6ee9;

/// Accuracy of the exact solves at the bottom of each level.
const BASE_ITER_THETA: f64 = 1e-6;
const BASE_CONVEX_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionConfig {
    pub p: f64,
    pub theta: f64,
    /// Oversampling constant `f(p)`.
    pub f_p: f64,
    /// Inputs with at most this many rows are solved directly. Defaults to `d`.
    pub base_case_rows: Option<usize>,
    pub seed: u64,
    /// Record probe statistics for every level.
    pub trace: bool,
    /// Omit the `d^{p/2}` factor from the keep probabilities (sound for `p <= 2`).
    pub drop_dimension_factor: bool,
    /// Probes per level; `None` derives the count from the `n^{theta/p}` accuracy target.
    pub probe_count: Option<usize>,
}

impl RecursionConfig {
    pub fn new(p: f64, theta: f64, seed: u64) -> Result<Self> {
        let cfg = RecursionConfig {
            p,
            theta,
            f_p: default_f(p),
            base_case_rows: None,
            seed,
            trace: false,
            drop_dimension_factor: false,
            probe_count: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(LewisError::UnsupportedExponent {
                p: self.p,
                hint: "the recursive solver accepts p >= 1",
            });
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(LewisError::invalid(format!(
                "theta = {} must lie in (0, 1)",
                self.theta
            )));
        }
        if !(self.f_p > 0.0 && self.f_p.is_finite()) {
            return Err(LewisError::invalid(format!("f(p) = {} must be positive", self.f_p)));
        }
        if self.probe_count == Some(0) {
            return Err(LewisError::invalid("probe_count must be positive"));
        }
        Ok(())
    }

    /// `f(p) n^{theta/2} [d^{p/2}] ln d`, the multiplier applied to `u_i^{p/2}`.
    pub fn keep_multiplier(&self, n: usize, d: usize) -> f64 {
        let dim = if self.drop_dimension_factor {
            1.0
        } else {
            (d as f64).powf(self.p / 2.0)
        };
        self.f_p * (n as f64).powf(self.theta / 2.0) * dim * (d as f64).ln().max(1.0)
    }
}

/// 1 for `p <= 2`, 4 above.
pub fn default_f(p: f64) -> f64 {
    if p <= 2.0 {
        1.0
    } else {
        4.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub input_rows: usize,
    /// Rows kept by the nonuniform pass (equal to `input_rows` for a base case).
    pub sampled_rows: usize,
    /// Rows handed to the exact solver.
    pub base_rows: usize,
    /// `sum_i p_i`, the expected value of `sampled_rows`.
    pub expected_rows: f64,
    pub base_case: bool,
    /// `(min, mean, max)` of the probe estimates `u_i`, when tracing.
    pub u_stats: Option<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecursionTrace {
    /// Ordered by level, top level first.
    pub levels: Vec<LevelStats>,
}

impl RecursionTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> &LevelStats {
        &self.levels[0]
    }

    /// One `level input_rows sampled_rows` line per level.
    pub fn to_text(&self) -> String {
        self.levels
            .iter()
            .map(|l| format!("{} {} {}\n", l.level, l.input_rows, l.sampled_rows))
            .collect()
    }
}

/// Exact inverse Lewis form of `a`: iterative for `p < 2`, convex otherwise.
pub fn base_solve(a: &Matrix, p: f64) -> Result<QuadForm> {
    if p < 2.0 {
        let cfg = IterConfig::new(p, BASE_ITER_THETA)?;
        Ok(approx_lewis_weights(a, &cfg, 0)?.gram_inverse)
    } else {
        let cfg = ConvexConfig::new(p, BASE_CONVEX_TOLERANCE)?;
        Ok(lewis_quadratic_form(a, &cfg)?.form)
    }
}

fn collapse(level: usize) -> impl FnOnce(LewisError) -> LewisError {
    move |e| match e {
        LewisError::RankDeficient { .. } | LewisError::NonFinite(_) => LewisError::RankCollapse {
            level,
            source: Box::new(e),
        },
        other => other,
    }
}

/// Uniform in `[0, 1)` from a hash of `(seed, i)`; lets the keep pass run in parallel.
fn hashed_uniform(seed: u64, i: usize) -> f64 {
    (mix_seed(seed, i as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn recurse(
    a: &Matrix,
    cfg: &RecursionConfig,
    level: usize,
    levels: &mut Vec<LevelStats>,
) -> Result<QuadForm> {
    let (n, d) = (a.rows(), a.cols());
    let threshold = cfg.base_case_rows.unwrap_or(d).max(d);
    if n <= threshold || n / 2 < d {
        let q = base_solve(a, cfg.p).map_err(collapse(level))?;
        levels.push(LevelStats {
            level,
            input_rows: n,
            sampled_rows: n,
            base_rows: n,
            expected_rows: n as f64,
            base_case: true,
            u_stats: None,
        });
        return Ok(q);
    }

    let level_seed = mix_seed(cfg.seed, level as u64);
    let mut rng = stream_rng(level_seed, HALVE_STREAM);
    let mut half: Vec<usize> = sample(&mut rng, n, n / 2).into_vec();
    half.sort_unstable();
    let q_half = recurse(&a.select_rows(&half)?, cfg, level + 1, levels)?;

    let beta = (n as f64).powf(cfg.theta / cfg.p);
    let probe_seed = mix_seed(level_seed, PROBE_STREAM);
    let sketch = match cfg.probe_count {
        Some(k) => SketchConfig::new(beta.max(1.0 + f64::EPSILON), k, probe_seed)?,
        None => SketchConfig::for_beta(beta.max(1.0 + f64::EPSILON), n, probe_seed)?,
    };
    let u = quad_form_probe(&q_half, a, &sketch)?;

    let mult = cfg.keep_multiplier(n, d);
    let probs: Vec<f64> = u
        .as_slice()
        .iter()
        .map(|ui| (mult * ui.powf(cfg.p / 2.0)).min(1.0))
        .collect();
    let keep_seed = mix_seed(level_seed, KEEP_STREAM);
    let kept: Vec<Option<f64>> = par::map_indexed(n, |i| {
        (hashed_uniform(keep_seed, i) < probs[i]).then(|| probs[i].powf(-1.0 / cfg.p))
    });
    let mut rows = Vec::new();
    let mut scales = Vec::new();
    for (i, k) in kept.iter().enumerate() {
        if let Some(s) = k {
            rows.push(i);
            scales.push(*s);
        }
    }
    if rows.len() < d {
        return Err(LewisError::RankCollapse {
            level,
            source: Box::new(LewisError::invalid(format!(
                "only {} of {n} rows kept for {d} columns",
                rows.len()
            ))),
        });
    }
    let resampled = a.select_rows(&rows)?.scale_rows(&scales)?;
    let q = base_solve(&resampled, cfg.p).map_err(collapse(level))?;

    let u_stats = cfg.trace.then(|| {
        let s = u.as_slice();
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.iter().cloned().fold(0.0, f64::max);
        (min, u.sum() / n as f64, max)
    });
    levels.push(LevelStats {
        level,
        input_rows: n,
        sampled_rows: rows.len(),
        base_rows: rows.len(),
        expected_rows: probs.iter().sum(),
        base_case: false,
        u_stats,
    });
    Ok(q)
}

/// Approximate inverse Lewis form of `a` and the per-level row accounting.
pub fn approx_lewis_form(a: &Matrix, cfg: &RecursionConfig) -> Result<(QuadForm, RecursionTrace)> {
    cfg.validate()?;
    reject_zero_rows(a)?;
    if a.rows() < a.cols() {
        return Err(LewisError::invalid(format!(
            "matrix has {} rows and {} columns; need n >= d",
            a.rows(),
            a.cols()
        )));
    }
    let mut levels = Vec::new();
    let q = recurse(a, cfg, 0, &mut levels)?;
    levels.sort_by_key(|l| l.level);
    Ok((q, RecursionTrace { levels }))
}

/// `w_i ~ (a_i^T Q a_i)^{p/2}` from Gaussian probes of `Q`.
pub fn approx_lewis_weights_from_form(
    a: &Matrix,
    q: &QuadForm,
    p: f64,
    cfg: &SketchConfig,
) -> Result<WeightVector> {
    crate::linalg::check_exponent(p)?;
    let u = quad_form_probe(q, a, cfg)?;
    WeightVector::new(u.as_slice().iter().map(|v| v.powf(p / 2.0)).collect())
}
