//! Oracles and fixtures shared by the integration tests. Nothing here calls the
//! library routine it is used to check.
#![allow(dead_code)]

use std::path::PathBuf;

use abcd_piml::cli::RunConfig;
use abcd_piml::metrics::SkillScores;
use abcd_piml::regress::DesignMatrix;
use abcd_piml::report::{MetricRow, MetricTable};

pub fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(manifest(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// The bundled synthetic catchment run configuration.
pub fn bundled_config() -> RunConfig {
    RunConfig::load(Some(&manifest("data/synthetic.cfg")), &[]).expect("bundled config loads")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Least squares with intercept by plain full-batch gradient descent on
/// `(1/2n)‖y - b - Xβ‖²`, step `1/L` with `L` bounding the Hessian's largest
/// eigenvalue. Runs until the gradient is negligible.
pub fn gd_least_squares(x: &DesignMatrix, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, m) = (x.rows(), x.cols());
    // the Hessian of the augmented problem is [1 x̄ᵀ; x̄ XᵀX/n]; its trace bounds λ_max
    let trace = 1.0 + (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
    let step = 1.0 / trace;
    let mut b = 0.0;
    let mut beta = vec![0.0; m];
    for _ in 0..2_000_000 {
        let mut gb = 0.0;
        let mut g = vec![0.0; m];
        for i in 0..n {
            let row = x.row(i);
            let r = b + row.iter().zip(&beta).map(|(a, c)| a * c).sum::<f64>() - y[i];
            gb += r;
            for j in 0..m {
                g[j] += r * row[j];
            }
        }
        gb /= n as f64;
        g.iter_mut().for_each(|v| *v /= n as f64);
        let norm = gb.abs().max(g.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        if norm < 1e-14 {
            break;
        }
        b -= step * gb;
        for j in 0..m {
            beta[j] -= step * g[j];
        }
    }
    (b, beta)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                let src = m[col].clone();
                m[r].iter_mut().zip(&src).for_each(|(v, s)| *v -= f * s);
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn rbf(a: &[f64], b: &[f64], sigma_f2: f64, ell: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sigma_f2 * (-d2 / (2.0 * ell * ell)).exp()
}

/// GP posterior mean and variance from an explicit `(K + σ_n² I)⁻¹`.
pub fn gpr_direct(
    x: &[Vec<f64>],
    y: &[f64],
    x_star: &[Vec<f64>],
    sigma_f2: f64,
    ell: f64,
    sigma_n2: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf(&x[i], &x[j], sigma_f2, ell) + if i == j { sigma_n2 } else { 0.0 }).collect())
        .collect();
    let kinv = invert(&k);
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for xs in x_star {
        let ks: Vec<f64> = x.iter().map(|xi| rbf(xi, xs, sigma_f2, ell)).collect();
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kinv[i][j] * ks[j]).sum()).collect();
        mean.push((0..n).map(|i| w[i] * y[i]).sum());
        var.push(rbf(xs, xs, sigma_f2, ell) - (0..n).map(|i| ks[i] * w[i]).sum::<f64>());
    }
    (mean, var)
}

/// Largest violation of the LASSO optimality conditions for
/// `(1/2n)‖y - b - Xβ‖² + λ‖β‖₁`, computed from the raw data.
pub fn lasso_kkt_residual(x: &DesignMatrix, y: &[f64], intercept: f64, beta: &[f64], lambda: f64) -> f64 {
    let (n, m) = (x.rows(), x.cols());
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - x.row(i).iter().zip(beta).map(|(a, c)| a * c).sum::<f64>())
        .collect();
    // the intercept is unpenalised, so the residual must sum to zero
    let mut worst = (resid.iter().sum::<f64>() / n as f64).abs();
    for j in 0..m {
        let g = (0..n).map(|i| x.get(i, j) * resid[i]).sum::<f64>() / n as f64;
        let v = if beta[j] == 0.0 { (g.abs() - lambda).max(0.0) } else { (g - lambda * beta[j].signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

pub fn scores(rmse: f64, pbias: f64, nse: f64) -> SkillScores {
    SkillScores { rmse, pbias, nse }
}

/// Fixed skill numbers used as formatter input.
pub fn reference_ml_table() -> MetricTable {
    let rows = [
        ("LSTM", 40.719, -4.841, 0.636),
        ("LASSO", 43.219, -15.048, 0.586),
        ("Ridge", 43.219, -15.05, 0.585),
        ("SVR", 45.157, 4.470, 0.548),
        ("GPR", 41.415, -4.733, 0.619),
    ];
    MetricTable {
        caption: "Performance evaluation of ML models".into(),
        variables: vec!["Q".into()],
        rows: rows.iter().map(|&(l, r, p, n)| MetricRow { label: l.into(), scores: vec![scores(r, p, n)] }).collect(),
    }
}
