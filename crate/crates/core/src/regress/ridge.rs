use serde::{Deserialize, Serialize};

use super::{center_columns, check_target, linear_predict, mean, DesignMatrix, RegressError};
use crate::linalg;

/// Relative pivot size below which the normal equations count as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, RegressError> {
        linear_predict(self.intercept, &self.coefficients, x)
    }
}

/// Solves `(XcᵀXc + λI) β = Xcᵀyc` on column-centred data; the intercept is
/// unpenalised and restores the means.
pub fn ridge_fit(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel, RegressError> {
    check_target(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RegressError::InvalidHyper(format!("lambda = {lambda}")));
    }
    let (n, m) = (x.rows(), x.cols());
    let (x_mean, xc) = center_columns(x);
    let y_mean = mean(y);

    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for i in 0..n {
        let row = &xc[i * m..(i + 1) * m];
        let yc = y[i] - y_mean;
        for j in 0..m {
            rhs[j] += row[j] * yc;
            for k in 0..=j {
                gram[j * m + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            gram[k * m + j] = gram[j * m + k];
        }
        gram[j * m + j] += lambda;
    }

    let scale = (0..m).map(|j| gram[j * m + j]).fold(0.0, f64::max);
    let l = linalg::cholesky(&gram, m).ok_or(RegressError::Singular)?;
    let min_pivot = (0..m).map(|j| l[j * m + j] * l[j * m + j]).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot <= SINGULAR_PIVOT * scale {
        return Err(RegressError::Singular);
    }
    let coefficients = linalg::cholesky_solve(&l, m, &rhs);
    let intercept = y_mean - x_mean.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeModel { intercept, coefficients, lambda })
}
