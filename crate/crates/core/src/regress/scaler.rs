use serde::{Deserialize, Serialize};

use super::{DesignMatrix, RegressError};

/// Per-feature min-max scaling learned from training rows. Constant features
/// map to 0.5 and invert back to their single training value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(train: &DesignMatrix) -> Self {
        let m = train.cols();
        let mut min = vec![f64::INFINITY; m];
        let mut max = vec![f64::NEG_INFINITY; m];
        for i in 0..train.rows() {
            for (j, &v) in train.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    /// Single-feature scaler for a target vector.
    pub fn fit_vector(y: &[f64]) -> Self {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min: vec![min], max: vec![max] }
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn forward(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (v - self.min[j]) / range
        } else {
            0.5
        }
    }

    fn backward(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            v * range + self.min[j]
        } else {
            self.min[j]
        }
    }

    fn map(&self, x: &DesignMatrix, f: impl Fn(usize, f64) -> f64) -> Result<DesignMatrix, RegressError> {
        x.check_cols(self.n_features())?;
        let m = x.cols();
        let values = x.values().iter().enumerate().map(|(k, &v)| f(k % m, v)).collect();
        DesignMatrix::new(x.rows(), m, values)
    }

    pub fn apply(&self, x: &DesignMatrix) -> Result<DesignMatrix, RegressError> {
        self.map(x, |j, v| self.forward(j, v))
    }

    pub fn invert(&self, x: &DesignMatrix) -> Result<DesignMatrix, RegressError> {
        self.map(x, |j, v| self.backward(j, v))
    }

    pub fn apply_vector(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.forward(0, v)).collect()
    }

    pub fn invert_vector(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.backward(0, v)).collect()
    }
}
