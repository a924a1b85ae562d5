//! Seeded random streams and the synthetic matrix generators used by tests,
//! benchmarks and the CLI fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LewisError, Result};
use crate::linalg::Matrix;

/// splitmix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n x d` matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, 0);
    Matrix::new(n, d, gaussian_vec(&mut rng, n * d)).expect("gaussian entries are finite")
}

/// Gaussian matrix whose first `spikes` rows are multiplied by `factor`.
pub fn spiky_matrix(n: usize, d: usize, spikes: usize, factor: f64, seed: u64) -> Matrix {
    let base = gaussian_matrix(n, d, seed);
    let scales: Vec<f64> = (0..n).map(|i| if i < spikes { factor } else { 1.0 }).collect();
    base.scale_rows(&scales).expect("scale vector matches row count")
}

/// The rows `(e1, e1, e2)` in two dimensions. Its l1 Lewis weights are `(1/2, 1/2, 1)`.
pub fn duplicated_row_matrix() -> Matrix {
    Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).expect("fixed fixture")
}

/// A named synthetic workload, parsed from `kind:NxD`.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Gaussian { n: usize, d: usize },
    /// Gaussian rows with five rows scaled by 1000.
    Spiky { n: usize, d: usize },
    Identity { d: usize },
    DuplicatedRow,
}

impl Generator {
    pub const SPIKES: usize = 5;
    pub const SPIKE_FACTOR: f64 = 1000.0;

    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || LewisError::invalid(format!("unknown generator spec '{spec}'"));
        if spec == "duplicated" {
            return Ok(Generator::DuplicatedRow);
        }
        let (kind, shape) = spec.split_once(':').ok_or_else(bad)?;
        let dims: Vec<usize> = shape
            .split('x')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind, dims.as_slice()) {
            ("gaussian", [n, d]) if *n >= *d && *d > 0 => Ok(Generator::Gaussian { n: *n, d: *d }),
            ("spiky", [n, d]) if *n >= *d + Self::SPIKES && *d > 0 => {
                Ok(Generator::Spiky { n: *n, d: *d })
            }
            ("identity", [d]) if *d > 0 => Ok(Generator::Identity { d: *d }),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Generator::Gaussian { n, d } => format!("gaussian:{n}x{d}"),
            Generator::Spiky { n, d } => format!("spiky:{n}x{d}"),
            Generator::Identity { d } => format!("identity:{d}"),
            Generator::DuplicatedRow => "duplicated".to_string(),
        }
    }

    pub fn build(&self, seed: u64) -> Matrix {
        match *self {
            Generator::Gaussian { n, d } => gaussian_matrix(n, d, seed),
            Generator::Spiky { n, d } => {
                spiky_matrix(n, d, Self::SPIKES, Self::SPIKE_FACTOR, seed)
            }
            Generator::Identity { d } => Matrix::identity(d),
            Generator::DuplicatedRow => duplicated_row_matrix(),
        }
    }
}
