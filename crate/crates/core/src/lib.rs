//! Lewis weights, leverage scores and row-sampling sketches for tall dense matrices.
//!
//! The `parallel` feature (on by default) runs per-row loops on rayon; without it
//! every loop runs sequentially with identical results.

pub mod convex;
pub mod error;
pub mod generate;
pub mod io;
pub mod iterative;
pub mod linalg;
pub mod par;
pub mod recursion;
pub mod sampler;
pub mod sketch;
pub mod verify;

pub use error::{LewisError, Result};
pub use linalg::{Matrix, QuadForm, WeightVector};
