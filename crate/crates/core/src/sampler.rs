//! Sampling plans from (approximate) Lewis weights and the row-sampling operator.
//!
//! A plan assigns each row a value `p_i` proportional to its weight, with
//! `sum_i p_i` equal to the row count required for the requested accuracy. The
//! sketch then draws `N` rows i.i.d. with probabilities `p_i / sum_j p_j` and
//! scales each drawn row by `p_i^{-1/p}`, so that `E ||S A x||_p^p = ||A x||_p^p`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{LewisError, Result};
use crate::generate::stream_rng;
use crate::linalg::{Matrix, WeightVector};
use crate::par;

pub const DEFAULT_OVERSAMPLE: f64 = 4.0;

const DRAW_STREAM: u64 = 0xd7a3;

/// Failure-probability regime of the row-count table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaMode {
    /// Failure probability polynomially small in `d`.
    HighProbability,
    /// Constant failure probability.
    Constant,
}

impl FromStr for DeltaMode {
    type Err = LewisError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" | "high-probability" => Ok(DeltaMode::HighProbability),
            "constant" => Ok(DeltaMode::Constant),
            _ => Err(LewisError::invalid(format!(
                "unknown delta mode '{s}' (expected 'high' or 'constant')"
            ))),
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaMode::HighProbability => "high",
            DeltaMode::Constant => "constant",
        })
    }
}

/// Natural log floored at 1, so degenerate arguments never shrink a count.
fn lg(x: f64) -> f64 {
    x.ln().max(1.0)
}

fn check_bound_args(d: usize, p: f64, epsilon: f64, oversample: f64) -> Result<()> {
    if d == 0 {
        return Err(LewisError::invalid("dimension must be at least 1"));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(LewisError::UnsupportedExponent {
            p,
            hint: "row-count bounds are available for p >= 1",
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(LewisError::invalid(format!("epsilon = {epsilon} must lie in (0, 1]")));
    }
    if !(oversample > 0.0 && oversample.is_finite()) {
        return Err(LewisError::invalid(format!(
            "oversampling constant {oversample} must be positive"
        )));
    }
    Ok(())
}

/// Unrounded row count `C_s * f(d, p, eps)`:
///
/// | p | mode | count |
/// |---|------|-------|
/// | 1 | high | `d ln(d/eps) / eps^2` |
/// | 1 | constant | `d ln d / eps^2` |
/// | (1, 2) | any | `d ln(d/eps) ln(ln(d)/eps)^2 / eps^2` |
/// | 2 | any | `d ln d / eps^2` |
/// | > 2 | any | `d^{p/2} ln d ln(1/eps) / eps^5` |
///
/// Every logarithm is floored at 1.
pub fn row_count_raw(d: usize, p: f64, epsilon: f64, oversample: f64, mode: DeltaMode) -> Result<f64> {
    check_bound_args(d, p, epsilon, oversample)?;
    let df = d as f64;
    let e2 = epsilon * epsilon;
    let base = if p == 1.0 {
        match mode {
            DeltaMode::HighProbability => df * lg(df / epsilon) / e2,
            DeltaMode::Constant => df * lg(df) / e2,
        }
    } else if p < 2.0 {
        df * lg(df / epsilon) * lg(lg(df) / epsilon).powi(2) / e2
    } else if p == 2.0 {
        df * lg(df) / e2
    } else {
        df.powf(p / 2.0) * lg(df) * lg(1.0 / epsilon) / epsilon.powi(5)
    };
    Ok(oversample * base)
}

/// `ceil(row_count_raw(..))`.
pub fn row_count_bound(
    d: usize,
    p: f64,
    epsilon: f64,
    oversample: f64,
    mode: DeltaMode,
) -> Result<usize> {
    Ok(row_count_raw(d, p, epsilon, oversample, mode)?.ceil() as usize)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanConfig {
    pub epsilon: f64,
    pub oversample_constant: f64,
    pub delta_mode: DeltaMode,
    /// For `p = 1` in high-probability mode, take `N` as the integer fixed point of
    /// `N = ceil(C_s d ln(N) / eps^2)`, which guarantees
    /// `p_i >= C_s w_i ln(N) / eps^2`. No effect otherwise.
    pub refine_count: bool,
}

impl PlanConfig {
    pub fn new(epsilon: f64, delta_mode: DeltaMode) -> Self {
        PlanConfig {
            epsilon,
            oversample_constant: DEFAULT_OVERSAMPLE,
            delta_mode,
            refine_count: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub p: f64,
    pub values: Vec<f64>,
    /// `N`, the table row count; equals `sum_i p_i` when the weights sum to `d`.
    pub total: usize,
    pub epsilon: f64,
    pub oversample_constant: f64,
    pub delta_mode: DeltaMode,
    /// Dimension inferred from the weights (`round(sum w)`, at least 1).
    pub dimension: usize,
}

impl SamplingPlan {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn value_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Draw probability of row `i`, `p_i / sum_j p_j`.
    pub fn probability(&self, i: usize) -> f64 {
        self.values[i] / self.value_sum()
    }
}

fn refined_total(dim: f64, oversample: f64, epsilon: f64, start: f64) -> f64 {
    let c = oversample * dim / (epsilon * epsilon);
    let mut n = start.ceil().max(1.0);
    for _ in 0..100 {
        let next = (c * lg(n)).ceil();
        if next == n {
            break;
        }
        n = next;
    }
    n
}

/// Per-row sampling values `p_i = w_i N_table / d` with `N_table = row_count_bound(d, ..)`
/// and `d = round(sum w)`. For exact Lewis weights `sum_i p_i = N_table`, so draws
/// with probability `p_i / N` are exactly unbiased.
pub fn sampling_plan(w: &WeightVector, p: f64, cfg: &PlanConfig) -> Result<SamplingPlan> {
    let d = (w.sum().round() as usize).max(1);
    let raw = row_count_raw(d, p, cfg.epsilon, cfg.oversample_constant, cfg.delta_mode)?;
    let total = if cfg.refine_count && p == 1.0 && cfg.delta_mode == DeltaMode::HighProbability {
        refined_total(d as f64, cfg.oversample_constant, cfg.epsilon, raw)
    } else {
        raw.ceil()
    };
    let total = total.max(1.0);
    let values: Vec<f64> = w.as_slice().iter().map(|wi| wi * total / d as f64).collect();
    Ok(SamplingPlan {
        p,
        values,
        total: total as usize,
        epsilon: cfg.epsilon,
        oversample_constant: cfg.oversample_constant,
        delta_mode: cfg.delta_mode,
        dimension: d,
    })
}

/// A realized sample: row `k` of `S A` is `scale_k * a_{index_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchOperator {
    pub entries: Vec<(usize, f64)>,
    pub source_rows: usize,
    pub p: f64,
}

pub const SKETCH_MAGIC: &str = "# lewisrows-sketch v1";

impl SketchOperator {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// How many times each source row was drawn.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.source_rows];
        for &(i, _) in &self.entries {
            m[i] += 1;
        }
        m
    }

    /// Writes the two-column text format with its header line.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{SKETCH_MAGIC} p={} N={} n={}",
            self.p,
            self.entries.len(),
            self.source_rows
        )?;
        for &(i, s) in &self.entries {
            writeln!(out, "{i} {s:e}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(LewisError::Parse {
                line: 1,
                message: "empty sketch file".into(),
            })?;
        let header = header?;
        let rest = header.strip_prefix(SKETCH_MAGIC).ok_or(LewisError::Parse {
            line: 1,
            message: format!("expected header starting with '{SKETCH_MAGIC}'"),
        })?;
        let mut p = None;
        let mut total = None;
        let mut n = None;
        for field in rest.split_whitespace() {
            let bad = || LewisError::Parse {
                line: 1,
                message: format!("bad header field '{field}'"),
            };
            let (k, v) = field.split_once('=').ok_or_else(bad)?;
            match k {
                "p" => p = Some(v.parse::<f64>().map_err(|_| bad())?),
                "N" => total = Some(v.parse::<usize>().map_err(|_| bad())?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let missing = |what: &str| LewisError::Parse {
            line: 1,
            message: format!("header lacks {what}"),
        };
        let p = p.ok_or_else(|| missing("p"))?;
        let total = total.ok_or_else(|| missing("N"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let mut entries = Vec::with_capacity(total);
        for (ln, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| LewisError::Parse {
                line: ln + 1,
                message: m.to_string(),
            };
            let mut it = line.split_whitespace();
            let i: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected a row index"))?;
            let s: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected a scale"))?;
            if it.next().is_some() {
                return Err(bad("trailing fields"));
            }
            if i >= n {
                return Err(bad(&format!("row index {i} out of range for n = {n}")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad("scale must be positive and finite"));
            }
            entries.push((i, s));
        }
        if entries.len() != total {
            return Err(LewisError::Parse {
                line: 1,
                message: format!("header promises N = {total} entries, found {}", entries.len()),
            });
        }
        Ok(SketchOperator {
            entries,
            source_rows: n,
            p,
        })
    }
}

/// Draws `N` rows i.i.d. from the plan; each entry carries scale `p_i^{-1/p}`.
pub fn draw_sketch(plan: &SamplingPlan, seed: u64) -> Result<SketchOperator> {
    let dist = WeightedIndex::new(&plan.values)
        .map_err(|e| LewisError::invalid(format!("sampling values rejected: {e}")))?;
    let scales: Vec<f64> = plan.values.iter().map(|v| v.powf(-1.0 / plan.p)).collect();
    let mut rng = stream_rng(seed, DRAW_STREAM);
    let entries = (0..plan.total)
        .map(|_| {
            let i = dist.sample(&mut rng);
            (i, scales[i])
        })
        .collect();
    Ok(SketchOperator {
        entries,
        source_rows: plan.rows(),
        p: plan.p,
    })
}

/// Forms `S A`.
pub fn apply_sketch(s: &SketchOperator, a: &Matrix) -> Result<Matrix> {
    if s.source_rows != a.rows() {
        return Err(LewisError::DimensionMismatch {
            expected: s.source_rows,
            found: a.rows(),
        });
    }
    if let Some(&(i, _)) = s.entries.iter().find(|(i, _)| *i >= a.rows()) {
        return Err(LewisError::invalid(format!(
            "sketch index {i} out of range for {} rows",
            a.rows()
        )));
    }
    if s.entries.is_empty() {
        return Err(LewisError::invalid("sketch has no entries"));
    }
    let d = a.cols();
    let rows = par::map_indexed(s.entries.len(), |k| {
        let (i, scale) = s.entries[k];
        a.row(i).iter().map(|v| v * scale).collect::<Vec<f64>>()
    });
    Matrix::new(s.entries.len(), d, rows.concat())
}
