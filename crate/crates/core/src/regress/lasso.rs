use serde::{Deserialize, Serialize};

use super::{center_columns, check_target, linear_predict, mean, DesignMatrix, RegressError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// Sweeps performed.
    pub iterations: usize,
    pub converged: bool,
}

impl LassoModel {
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, RegressError> {
        linear_predict(self.intercept, &self.coefficients, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once the largest coefficient change in a sweep falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000 }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn lasso_fit(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<LassoModel, RegressError> {
    lasso_fit_with(x, y, lambda, LassoOptions::default())
}

/// Cyclic coordinate descent on `(1/2n)‖yc - Xc β‖² + λ‖β‖₁` with centred
/// columns. Each update divides by the column's `xⱼᵀxⱼ/n`; zero-variance columns
/// keep a zero coefficient. Exhausting `max_iter` returns the model with
/// `converged = false`.
pub fn lasso_fit_with(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    opts: LassoOptions,
) -> Result<LassoModel, RegressError> {
    check_target(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RegressError::InvalidHyper(format!("lambda = {lambda}")));
    }
    let (n, m) = (x.rows(), x.cols());
    let nf = n as f64;
    let (x_mean, xc) = center_columns(x);
    let y_mean = mean(y);

    let col_sq: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| xc[i * m + j] * xc[i * m + j]).sum::<f64>() / nf)
        .collect();
    let mut beta = vec![0.0; m];
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..m {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = (0..n).map(|i| xc[i * m + j] * resid[i]).sum::<f64>() / nf + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = new - old;
            if delta != 0.0 {
                for i in 0..n {
                    resid[i] -= xc[i * m + j] * delta;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let intercept = y_mean - x_mean.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
    Ok(LassoModel { intercept, coefficients: beta, lambda, iterations, converged })
}

/// Largest KKT violation of a fitted model on its training data, measured on
/// centred columns: `|xⱼᵀr/n| - λ` for zero coefficients and
/// `|xⱼᵀr/n - λ sign(βⱼ)|` otherwise.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], model: &LassoModel) -> f64 {
    let (n, m) = (x.rows(), x.cols());
    let (_, xc) = center_columns(x);
    let y_mean = mean(y);
    let resid: Vec<f64> = (0..n)
        .map(|i| {
            let fit: f64 = (0..m).map(|j| xc[i * m + j] * model.coefficients[j]).sum();
            y[i] - y_mean - fit
        })
        .collect();
    (0..m)
        .map(|j| {
            let g = (0..n).map(|i| xc[i * m + j] * resid[i]).sum::<f64>() / n as f64;
            let b = model.coefficients[j];
            if b == 0.0 {
                (g.abs() - model.lambda).max(0.0)
            } else {
                (g - model.lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}
