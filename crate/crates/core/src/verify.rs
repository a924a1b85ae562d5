//! Oracles: a tight Lewis-weight solver, a sketch distortion estimator and
//! numerical checks of the structural properties of Lewis weights.
//!
//! Everything here is slow by design and deterministic given its seed.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::convex::{lewis_quadratic_form, ConvexConfig};
use crate::error::{LewisError, Result};
use crate::generate::{gaussian_vec, stream_rng};
use crate::iterative::almost_lewis_from_forms;
use crate::linalg::{
    abs_pow, check_exponent, inverse_quadratic_forms, leverage_scores_exact, reject_zero_rows,
    weighted_gram, Matrix, QuadForm, WeightVector,
};
use crate::par;

/// Default weight-comparison tolerance for the `check_*` oracles.
pub const WEIGHT_TOLERANCE: f64 = 1e-7;
/// Default accuracy of [`brute_force_lewis`] used by the oracles.
pub const BRUTE_FORCE_TOLERANCE: f64 = 1e-10;

const MAX_FIXED_POINT_STEPS: usize = 100_000;
const ASCENT_SWEEPS: usize = 50;
const DIRECTION_STREAM: u64 = 0xd1_5707;

/// Lewis weights to almost-Lewis residual `<= 1 + tol`.
///
/// `p < 4` iterates the exact fixed-point map from all ones; `p >= 4` runs the
/// convex solver at `tol / 4` and checks the residual afterwards.
pub fn brute_force_lewis(a: &Matrix, p: f64, tol: f64) -> Result<WeightVector> {
    check_exponent(p)?;
    reject_zero_rows(a)?;
    if !(tol > 0.0 && tol < 0.5) {
        return Err(LewisError::invalid(format!("tol = {tol} must lie in (0, 0.5)")));
    }
    if p == 2.0 {
        return leverage_scores_exact(a);
    }
    if p >= 4.0 {
        let sol = lewis_quadratic_form(a, &ConvexConfig::new(p, tol / 4.0)?)?;
        let residual = crate::iterative::almost_lewis_residual(a, &sol.weights, p)?;
        if residual > 1.0 + tol {
            return Err(LewisError::NonConvergence {
                steps: sol.steps,
                certificate: residual,
            });
        }
        return Ok(sol.weights);
    }
    let mut w = WeightVector::ones(a.rows());
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_FIXED_POINT_STEPS {
        let forms = inverse_quadratic_forms(a, &weighted_gram(a, &w, p)?)?;
        residual = almost_lewis_from_forms(&forms, &w, p);
        if residual <= 1.0 + tol {
            return Ok(w);
        }
        w = WeightVector::new(forms.iter().map(|q| q.powf(p / 2.0)).collect())?;
    }
    Err(LewisError::NonConvergence {
        steps: MAX_FIXED_POINT_STEPS,
        certificate: residual,
    })
}

/// Extremes of `||A' x||_p / ||A x||_p` over the probed directions.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionReport {
    /// `max(0, ln max_ratio)`.
    pub max_over: f64,
    /// `max(0, -ln min_ratio)`.
    pub max_under: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub directions_tested: usize,
    /// Direction attaining the larger of the two log deviations.
    pub worst_direction: Vec<f64>,
    /// Directions skipped because `A x = 0`.
    pub excluded: usize,
}

impl DistortionReport {
    /// Largest log deviation found. A lower bound on the true distortion.
    pub fn distortion(&self) -> f64 {
        self.max_over.max(self.max_under)
    }

    pub fn passes(&self, epsilon: f64) -> bool {
        self.distortion() <= epsilon.ln_1p()
    }

    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let dir: Vec<String> = self.worst_direction.iter().map(|v| format!("{v:e}")).collect();
        format!(
            "max_over={:e}\nmax_under={:e}\nmax_ratio={:e}\nmin_ratio={:e}\ndistortion={:e}\n\
             directions_tested={}\nexcluded={}\nworst_direction={}\n",
            self.max_over,
            self.max_under,
            self.max_ratio,
            self.min_ratio,
            self.distortion(),
            self.directions_tested,
            self.excluded,
            dir.join(" ")
        )
    }
}

fn pnorm_pow(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| abs_pow(*x, p)).sum()
}

fn column_major(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a.get(i, j)).collect())
        .collect()
}

/// Coordinate-wise local search on `x`, maximizing `sign * ln(||A'x|| / ||Ax||)`.
/// Returns the final log ratio (unsigned) and direction.
fn local_ascent(
    cols: &[Vec<f64>],
    cols_s: &[Vec<f64>],
    p: f64,
    start: &[f64],
    sign: f64,
) -> (f64, Vec<f64>) {
    let d = start.len();
    let mut x = start.to_vec();
    let mut ax: Vec<f64> = vec![0.0; cols[0].len()];
    let mut sx: Vec<f64> = vec![0.0; cols_s[0].len()];
    for j in 0..d {
        for (t, c) in ax.iter_mut().zip(&cols[j]) {
            *t += x[j] * c;
        }
        for (t, c) in sx.iter_mut().zip(&cols_s[j]) {
            *t += x[j] * c;
        }
    }
    let score = |ax: &[f64], sx: &[f64]| {
        let den = pnorm_pow(ax, p);
        if den > 0.0 {
            sign * (pnorm_pow(sx, p).ln() - den.ln()) / p
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut best = score(&ax, &sx);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut step = vec![0.5 * norm / (d as f64).sqrt(); d];
    let mut trial_a = ax.clone();
    let mut trial_s = sx.clone();
    for _ in 0..ASCENT_SWEEPS {
        for j in 0..d {
            let mut moved = false;
            for h in [step[j], -step[j]] {
                for ((t, base), c) in trial_a.iter_mut().zip(&ax).zip(&cols[j]) {
                    *t = base + h * c;
                }
                for ((t, base), c) in trial_s.iter_mut().zip(&sx).zip(&cols_s[j]) {
                    *t = base + h * c;
                }
                let s = score(&trial_a, &trial_s);
                if s > best {
                    best = s;
                    x[j] += h;
                    std::mem::swap(&mut ax, &mut trial_a);
                    std::mem::swap(&mut sx, &mut trial_s);
                    moved = true;
                    break;
                }
            }
            step[j] *= if moved { 1.5 } else { 0.5 };
        }
    }
    (sign * best, x)
}

/// Probes `||A' x||_p / ||A x||_p` on the canonical axes, then `num_dirs` seeded
/// Gaussian directions, then refines every record-setting direction by local
/// search. Directions are a fixed stream per seed, so the reported extremes
/// never shrink as `num_dirs` grows.
pub fn distortion_estimate(
    a: &Matrix,
    a_sketch: &Matrix,
    p: f64,
    num_dirs: usize,
    seed: u64,
) -> Result<DistortionReport> {
    check_exponent(p)?;
    let d = a.cols();
    if a_sketch.cols() != d {
        return Err(LewisError::DimensionMismatch {
            expected: d,
            found: a_sketch.cols(),
        });
    }
    let total = d + num_dirs;
    let direction = |k: usize| -> Vec<f64> {
        if k < d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            e
        } else {
            gaussian_vec(&mut stream_rng(seed ^ DIRECTION_STREAM, k as u64), d)
        }
    };
    let ratios: Vec<Option<f64>> = par::map_indexed(total, |k| {
        let x = direction(k);
        let den = a.norm_pow(&x, p);
        (den > 0.0).then(|| (a_sketch.norm_pow(&x, p).ln() - den.ln()) / p)
    });

    let mut over_records = Vec::new();
    let mut under_records = Vec::new();
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut excluded = 0;
    for (k, r) in ratios.iter().enumerate() {
        match r {
            None => excluded += 1,
            Some(r) => {
                if *r > hi {
                    hi = *r;
                    over_records.push(k);
                }
                if *r < lo {
                    lo = *r;
                    under_records.push(k);
                }
            }
        }
    }
    if over_records.is_empty() {
        return Err(LewisError::invalid("every probed direction has A x = 0"));
    }

    let cols = column_major(a);
    let cols_s = column_major(a_sketch);
    let starts: Vec<(usize, f64)> = over_records
        .iter()
        .map(|&k| (k, 1.0))
        .chain(under_records.iter().map(|&k| (k, -1.0)))
        .collect();
    let refined = par::map_indexed(starts.len(), |s| {
        let (k, sign) = starts[s];
        local_ascent(&cols, &cols_s, p, &direction(k), sign)
    });

    let mut hi_dir = direction(*over_records.last().unwrap());
    let mut lo_dir = direction(*under_records.last().unwrap());
    for ((_, sign), (r, x)) in starts.iter().zip(refined) {
        if *sign > 0.0 && r > hi {
            hi = r;
            hi_dir = x;
        } else if *sign < 0.0 && r < lo {
            lo = r;
            lo_dir = x;
        }
    }
    let max_over = hi.max(0.0);
    let max_under = (-lo).max(0.0);
    let worst = if max_over >= max_under { hi_dir } else { lo_dir };
    let norm = worst.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(DistortionReport {
        max_over,
        max_under,
        max_ratio: hi.exp(),
        min_ratio: lo.exp(),
        directions_tested: total - excluded,
        worst_direction: worst.iter().map(|v| v / norm).collect(),
        excluded,
    })
}

/// Whether appending `new_row` leaves every existing weight at most `tol` higher.
pub fn check_monotonicity(a: &Matrix, new_row: &[f64], p: f64, tol: f64) -> Result<bool> {
    if p > 2.0 {
        return Err(LewisError::UnsupportedExponent {
            p,
            hint: "row-addition monotonicity holds only for p <= 2",
        });
    }
    let extended = a.vstack(&Matrix::new(1, new_row.len(), new_row.to_vec())?)?;
    let before = brute_force_lewis(a, p, BRUTE_FORCE_TOLERANCE)?;
    let after = brute_force_lewis(&extended, p, BRUTE_FORCE_TOLERANCE)?;
    Ok(before
        .as_slice()
        .iter()
        .zip(after.as_slice())
        .all(|(w, w2)| *w2 <= w + tol))
}

/// `max_i w'_i / w_i` over the rows of `A` after appending `extra_rows`.
pub fn check_weight_inflation(a: &Matrix, extra_rows: Option<&Matrix>, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(LewisError::UnsupportedExponent {
            p,
            hint: "the weight inflation bound is stated for p > 2",
        });
    }
    let extra = match extra_rows {
        Some(e) if e.rows() > 0 => e,
        _ => return Ok(1.0),
    };
    let before = brute_force_lewis(a, p, BRUTE_FORCE_TOLERANCE)?;
    let after = brute_force_lewis(&a.vstack(extra)?, p, BRUTE_FORCE_TOLERANCE)?;
    Ok(before
        .as_slice()
        .iter()
        .zip(after.as_slice())
        .map(|(w, w2)| w2 / w)
        .fold(0.0, f64::max))
}

/// `(p/2) / (1 - |p/2 - 1|)` for `p < 4`; `None` otherwise.
pub fn stability_bound(p: f64) -> Option<f64> {
    (p > 0.0 && p < 4.0).then(|| (p / 2.0) / (1.0 - (p / 2.0 - 1.0).abs()))
}

/// Realized stability exponents for one row-scaling perturbation, both divided
/// by `ln alpha` with `alpha = max_i max(s_i, 1/s_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    /// `max_i |ln(B'_i / B_i)|` for the reweighted rows `B_i = w_i^{1/2-1/p} a_i`.
    /// Bounded by the stability exponent `c`.
    pub reweighted_exponent: f64,
    /// `max_i |ln(w'_i / w_i)|`. Bounded by `p (1 + c)` in general, not by `c`.
    pub weight_exponent: f64,
}

/// Compares the brute-force weights of `A` and of `A'` whose row `i` is scaled
/// by `row_scalars[i]`.
pub fn check_stability(a: &Matrix, row_scalars: &[f64], p: f64) -> Result<StabilityReport> {
    if row_scalars.len() != a.rows() {
        return Err(LewisError::DimensionMismatch {
            expected: a.rows(),
            found: row_scalars.len(),
        });
    }
    if row_scalars.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(LewisError::invalid("row scalars must be positive and finite"));
    }
    let log_alpha = row_scalars.iter().map(|s| s.ln().abs()).fold(0.0, f64::max);
    if log_alpha == 0.0 {
        return Ok(StabilityReport {
            reweighted_exponent: 0.0,
            weight_exponent: 0.0,
        });
    }
    let before = brute_force_lewis(a, p, BRUTE_FORCE_TOLERANCE)?;
    let after = brute_force_lewis(&a.scale_rows(row_scalars)?, p, BRUTE_FORCE_TOLERANCE)?;
    let mut rows: f64 = 0.0;
    let mut weights: f64 = 0.0;
    for ((w, w2), s) in before.as_slice().iter().zip(after.as_slice()).zip(row_scalars) {
        let lw = (w2 / w).ln();
        weights = weights.max(lw.abs());
        rows = rows.max((s.ln() + (0.5 - 1.0 / p) * lw).abs());
    }
    Ok(StabilityReport {
        reweighted_exponent: rows / log_alpha,
        weight_exponent: weights / log_alpha,
    })
}

/// Replaces row `i` by `k` copies of `k^{-1/p} a_i`, placed at rows `i .. i + k`.
pub fn split_row(a: &Matrix, i: usize, k: usize, p: f64) -> Result<Matrix> {
    check_exponent(p)?;
    if i >= a.rows() || k == 0 {
        return Err(LewisError::invalid(format!(
            "cannot split row {i} of {} into {k} pieces",
            a.rows()
        )));
    }
    let c = (k as f64).powf(-1.0 / p);
    let piece: Vec<f64> = a.row(i).iter().map(|v| c * v).collect();
    let mut data = Vec::with_capacity((a.rows() + k - 1) * a.cols());
    for r in 0..a.rows() {
        if r == i {
            for _ in 0..k {
                data.extend_from_slice(&piece);
            }
        } else {
            data.extend_from_slice(a.row(r));
        }
    }
    Matrix::new(a.rows() + k - 1, a.cols(), data)
}

/// Whether splitting row `i` into `k` pieces divides its weight by `k` and leaves
/// the others alone (to `tol`), and preserves `||A x||_p` to `1e-12` relative on
/// 100 seeded directions.
pub fn check_split_invariance(
    a: &Matrix,
    i: usize,
    k: usize,
    p: f64,
    tol: f64,
    seed: u64,
) -> Result<bool> {
    let split = split_row(a, i, k, p)?;
    let mut rng = stream_rng(seed, DIRECTION_STREAM);
    for _ in 0..100 {
        let x = gaussian_vec(&mut rng, a.cols());
        let (n0, n1) = (a.norm(&x, p), split.norm(&x, p));
        if (n0 - n1).abs() > 1e-12 * n0 {
            return Ok(false);
        }
    }
    if k == 1 {
        return Ok(true);
    }
    let w = brute_force_lewis(a, p, BRUTE_FORCE_TOLERANCE)?;
    let ws = brute_force_lewis(&split, p, BRUTE_FORCE_TOLERANCE)?;
    let (w, ws) = (w.as_slice(), ws.as_slice());
    let copies_ok = ws[i..i + k].iter().all(|c| (c - w[i] / k as f64).abs() <= tol);
    let others_ok = (0..a.rows())
        .filter(|&r| r != i)
        .all(|r| {
            let s = if r < i { r } else { r + k - 1 };
            (ws[s] - w[r]).abs() <= tol
        });
    Ok(copies_ok && others_ok)
}

/// Smallest and largest eigenvalue of `Q G` for SPD `Q` and `G`.
pub fn form_eigen_range(q: &QuadForm, g: &QuadForm) -> (f64, f64) {
    let chol = Cholesky::new(g.to_nalgebra()).expect("G is positive definite");
    let l = chol.l();
    let sym: DMatrix<f64> = l.transpose() * q.to_nalgebra() * &l;
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    (eig.min(), eig.max())
}
