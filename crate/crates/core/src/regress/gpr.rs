use serde::{Deserialize, Serialize};

use super::{check_target, DesignMatrix, RegressError};
use crate::linalg;

/// Largest training set accepted; fitting is cubic in `n`.
pub const GPR_MAX_SAMPLES: usize = 5000;
/// First diagonal jitter tried when the kernel matrix fails to factor.
pub const JITTER_START: f64 = 1e-10;
/// Last jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Zero-mean GP with squared-exponential kernel
/// `k(x, x') = σ_f² exp(-‖x - x'‖² / (2ℓ²))` and Gaussian noise `σ_n²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GprPayload", try_from = "GprPayload")]
pub struct GprModel {
    sigma_f2: f64,
    length_scale: f64,
    sigma_n2: f64,
    /// Extra diagonal added so `K + (σ_n² + jitter) I` factors.
    jitter: f64,
    x_train: DesignMatrix,
    y_train: Vec<f64>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GprPayload {
    sigma_f2: f64,
    length_scale: f64,
    sigma_n2: f64,
    x_train: DesignMatrix,
    y_train: Vec<f64>,
}

impl From<GprModel> for GprPayload {
    fn from(m: GprModel) -> Self {
        GprPayload {
            sigma_f2: m.sigma_f2,
            length_scale: m.length_scale,
            sigma_n2: m.sigma_n2,
            x_train: m.x_train,
            y_train: m.y_train,
        }
    }
}

impl TryFrom<GprPayload> for GprModel {
    type Error = RegressError;
    fn try_from(p: GprPayload) -> Result<Self, Self::Error> {
        gpr_fit(&p.x_train, &p.y_train, p.sigma_f2, p.length_scale, p.sigma_n2)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GprModel {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.sigma_f2 * (-sq_dist(a, b) / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    pub fn sigma_f2(&self) -> f64 {
        self.sigma_f2
    }
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }
    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Posterior mean and variance (variance clamped at 0) at each row of `x`.
    pub fn predict(&self, x: &DesignMatrix) -> Result<(Vec<f64>, Vec<f64>), RegressError> {
        x.check_cols(self.x_train.cols())?;
        let n = self.x_train.rows();
        let mut mean = Vec::with_capacity(x.rows());
        let mut var = Vec::with_capacity(x.rows());
        let mut k_star = vec![0.0; n];
        for r in 0..x.rows() {
            let xr = x.row(r);
            for (i, k) in k_star.iter_mut().enumerate() {
                *k = self.kernel(self.x_train.row(i), xr);
            }
            mean.push(k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum());
            linalg::forward_substitute(&self.chol, n, &mut k_star);
            let explained: f64 = k_star.iter().map(|v| v * v).sum();
            var.push((self.kernel(xr, xr) - explained).max(0.0));
        }
        Ok((mean, var))
    }
}

/// Factors `K + σ_n² I`, adding jitter from 1e-10 upwards (×10 each time, up
/// to 1e-4) only if the plain matrix is not numerically positive definite.
pub fn gpr_fit(
    x: &DesignMatrix,
    y: &[f64],
    sigma_f2: f64,
    length_scale: f64,
    sigma_n2: f64,
) -> Result<GprModel, RegressError> {
    check_target(x, y)?;
    if !(sigma_f2 > 0.0 && sigma_f2.is_finite()) {
        return Err(RegressError::InvalidHyper(format!("sigma_f2 = {sigma_f2}")));
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(RegressError::InvalidHyper(format!("length_scale = {length_scale}")));
    }
    if !(sigma_n2 >= 0.0 && sigma_n2.is_finite()) {
        return Err(RegressError::InvalidHyper(format!("sigma_n2 = {sigma_n2}")));
    }
    let n = x.rows();
    if n > GPR_MAX_SAMPLES {
        return Err(RegressError::TooManySamples { n, cap: GPR_MAX_SAMPLES });
    }

    let mut model = GprModel {
        sigma_f2,
        length_scale,
        sigma_n2,
        jitter: 0.0,
        x_train: x.clone(),
        y_train: y.to_vec(),
        chol: Vec::new(),
        alpha: Vec::new(),
    };
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = model.kernel(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let mut jitter = 0.0;
    let chol = loop {
        let mut a = k.clone();
        for i in 0..n {
            a[i * n + i] += sigma_n2 + jitter;
        }
        if let Some(l) = linalg::cholesky(&a, n) {
            break l;
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(RegressError::NotPositiveDefinite(JITTER_MAX));
        }
    };
    model.alpha = linalg::cholesky_solve(&chol, n, y);
    model.chol = chol;
    model.jitter = jitter;
    Ok(model)
}
