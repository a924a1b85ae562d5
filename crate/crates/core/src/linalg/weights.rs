use crate::error::{LewisError, Result};

/// A vector of strictly positive, finite per-row weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LewisError::invalid("weight vector is empty"));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(LewisError::invalid(format!(
                "weight {i} is {}, weights must be finite and strictly positive",
                values[i]
            )));
        }
        Ok(WeightVector(values))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        WeightVector::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|v| v * c).collect())
    }

    /// `max_i |ln(self_i / other_i)|`, the log-infinity distance.
    pub fn log_distance(&self, other: &WeightVector) -> f64 {
        assert_eq!(self.len(), other.len(), "weight vectors differ in length");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a / b).ln().abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
