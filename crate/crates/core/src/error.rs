use thiserror::Error;

/// Errors produced by the weight solvers, samplers and file readers.
#[derive(Debug, Error)]
pub enum LewisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A pivot of the Gram factorization fell below the relative threshold.
    #[error(
        "matrix is rank deficient: pivot {step} is {pivot:e}, below {threshold:e} \
         (rank at most {rank} of {dim})"
    )]
    RankDeficient {
        step: usize,
        pivot: f64,
        threshold: f64,
        rank: usize,
        dim: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("p = {p} is not supported here: {hint}")]
    UnsupportedExponent { p: f64, hint: &'static str },

    #[error("solver did not converge after {steps} steps (best certificate {certificate})")]
    NonConvergence { steps: usize, certificate: f64 },

    #[error("rank collapse at recursion level {level}: {source}")]
    RankCollapse {
        level: usize,
        #[source]
        source: Box<LewisError>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LewisError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LewisError::InvalidInput(msg.into())
    }

    /// True for errors caused by numerics (rank, convergence) rather than bad arguments or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LewisError::RankDeficient { .. }
                | LewisError::NonFinite(_)
                | LewisError::NonConvergence { .. }
                | LewisError::RankCollapse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LewisError>;
