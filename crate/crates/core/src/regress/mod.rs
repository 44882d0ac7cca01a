//! Regression stack: min-max scaling, ridge, LASSO and Gaussian process
//! regression behind one fit/predict contract, plus grid-search selection.

mod gpr;
mod grid;
mod lasso;
mod ridge;
mod scaler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gpr::{gpr_fit, GprModel, GPR_MAX_SAMPLES, JITTER_MAX, JITTER_START};
pub use grid::{chronological_folds, grid_search, CvRow, Fold, GridSearchResult, ParamGrid};
pub use lasso::{kkt_violation, lasso_fit, lasso_fit_with, LassoModel, LassoOptions};
pub use ridge::{ridge_fit, RidgeModel};
pub use scaler::MinMaxScaler;

/// Version stamped into serialized model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressError {
    #[error("design matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("design matrix has {got} values, expected {rows}×{cols}")]
    BadShape { rows: usize, cols: usize, got: usize },
    #[error("non-finite value in design matrix at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("non-finite target at index {0}")]
    NonFiniteTarget(usize),
    #[error("column count mismatch: expected {expected}, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("target length {got} does not match {rows} rows")]
    TargetLength { rows: usize, got: usize },
    #[error("normal equations are singular; use lambda > 0 for collinear or constant columns")]
    Singular,
    #[error("kernel matrix not positive definite even with jitter {0}")]
    NotPositiveDefinite(f64),
    #[error("{n} training samples exceed the GPR cap of {cap}")]
    TooManySamples { n: usize, cap: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("fold {fold} has only {rows} rows; need at least 2 per block")]
    FoldTooSmall { fold: usize, rows: usize },
    #[error("every grid point failed to fit; first error: {0}")]
    AllGridPointsFailed(String),
    #[error("model document: {0}")]
    Document(String),
}

/// `n × m` row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DesignMatrix {
    type Error = RegressError;
    fn try_from(r: RawMatrix) -> Result<Self, Self::Error> {
        DesignMatrix::new(r.rows, r.cols, r.values)
    }
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, RegressError> {
        if rows == 0 || cols == 0 {
            return Err(RegressError::EmptyMatrix);
        }
        if values.len() != rows * cols {
            return Err(RegressError::BadShape { rows, cols, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite { row: i / cols, col: i % cols });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, RegressError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(RegressError::ColumnMismatch { expected: cols, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self, RegressError> {
        let values = self.values[range.start * self.cols..range.end * self.cols].to_vec();
        Self::new(range.len(), self.cols, values)
    }

    pub(crate) fn check_cols(&self, expected: usize) -> Result<(), RegressError> {
        if self.cols != expected {
            return Err(RegressError::ColumnMismatch { expected, got: self.cols });
        }
        Ok(())
    }
}

pub(crate) fn check_target(x: &DesignMatrix, y: &[f64]) -> Result<(), RegressError> {
    if y.len() != x.rows() {
        return Err(RegressError::TargetLength { rows: x.rows(), got: y.len() });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(RegressError::NonFiniteTarget(i));
    }
    Ok(())
}

/// Column means of `x` and the centred copy.
pub(crate) fn center_columns(x: &DesignMatrix) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (x.rows(), x.cols());
    let mut means = vec![0.0; m];
    for i in 0..n {
        for (j, mean) in means.iter_mut().enumerate() {
            *mean += x.get(i, j);
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    let mut centered = x.values().to_vec();
    for i in 0..n {
        for j in 0..m {
            centered[i * m + j] -= means[j];
        }
    }
    (means, centered)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear predictor shared by ridge and LASSO.
pub(crate) fn linear_predict(intercept: f64, coef: &[f64], x: &DesignMatrix) -> Result<Vec<f64>, RegressError> {
    x.check_cols(coef.len())?;
    Ok((0..x.rows())
        .map(|i| intercept + x.row(i).iter().zip(coef).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Lasso,
    Gpr,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 3] = [RegressorKind::Ridge, RegressorKind::Lasso, RegressorKind::Gpr];

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            RegressorKind::Ridge => "Ridge",
            RegressorKind::Lasso => "LASSO",
            RegressorKind::Gpr => "GPR",
        }
    }

    /// Default search grid in scaled space.
    pub fn default_grid(self) -> ParamGrid {
        let lambdas: Vec<f64> = (-4..=2).map(|e| 10f64.powi(e)).collect();
        match self {
            RegressorKind::Ridge | RegressorKind::Lasso => ParamGrid::new(vec![("lambda".into(), lambdas)]),
            RegressorKind::Gpr => ParamGrid::new(vec![
                ("length_scale".into(), vec![0.1, 0.3, 1.0, 3.0]),
                ("sigma_f2".into(), vec![0.5, 1.0, 2.0]),
                ("sigma_n2".into(), vec![1e-4, 1e-2, 1e-1]),
            ]),
        }
    }

    /// Hyperparameters for one named grid point.
    pub fn hyper_from(self, point: &[(String, f64)]) -> Result<HyperParams, RegressError> {
        let get = |name: &str| {
            point
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| RegressError::InvalidHyper(format!("{self} grid is missing `{name}`")))
        };
        let allowed: &[&str] = match self {
            RegressorKind::Ridge | RegressorKind::Lasso => &["lambda"],
            RegressorKind::Gpr => &["sigma_f2", "length_scale", "sigma_n2"],
        };
        if let Some((n, _)) = point.iter().find(|(n, _)| !allowed.contains(&n.as_str())) {
            return Err(RegressError::InvalidHyper(format!("{self} has no hyperparameter `{n}`")));
        }
        let h = match self {
            RegressorKind::Ridge => HyperParams::Ridge { lambda: get("lambda")? },
            RegressorKind::Lasso => HyperParams::Lasso { lambda: get("lambda")? },
            RegressorKind::Gpr => HyperParams::Gpr {
                sigma_f2: get("sigma_f2")?,
                length_scale: get("length_scale")?,
                sigma_n2: get("sigma_n2")?,
            },
        };
        h.validate()?;
        Ok(h)
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegressorKind::Ridge => "ridge",
            RegressorKind::Lasso => "lasso",
            RegressorKind::Gpr => "gpr",
        })
    }
}

impl FromStr for RegressorKind {
    type Err = RegressError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ridge" => Ok(RegressorKind::Ridge),
            "lasso" => Ok(RegressorKind::Lasso),
            "gpr" => Ok(RegressorKind::Gpr),
            other => Err(RegressError::InvalidHyper(format!("unknown regressor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HyperParams {
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    Gpr { sigma_f2: f64, length_scale: f64, sigma_n2: f64 },
}

impl HyperParams {
    pub fn kind(&self) -> RegressorKind {
        match self {
            HyperParams::Ridge { .. } => RegressorKind::Ridge,
            HyperParams::Lasso { .. } => RegressorKind::Lasso,
            HyperParams::Gpr { .. } => RegressorKind::Gpr,
        }
    }

    fn validate(&self) -> Result<(), RegressError> {
        let bad = |msg: String| Err(RegressError::InvalidHyper(msg));
        match *self {
            HyperParams::Ridge { lambda } | HyperParams::Lasso { lambda } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("lambda = {lambda} must be finite and >= 0"));
                }
            }
            HyperParams::Gpr { sigma_f2, length_scale, sigma_n2 } => {
                if !(sigma_f2 > 0.0 && sigma_f2.is_finite()) {
                    return bad(format!("sigma_f2 = {sigma_f2} must be > 0"));
                }
                if !(length_scale > 0.0 && length_scale.is_finite()) {
                    return bad(format!("length_scale = {length_scale} must be > 0"));
                }
                if !(sigma_n2 >= 0.0 && sigma_n2.is_finite()) {
                    return bad(format!("sigma_n2 = {sigma_n2} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Fits the corresponding model on already-scaled data.
    pub fn fit(&self, x: &DesignMatrix, y: &[f64]) -> Result<FittedModel, RegressError> {
        self.validate()?;
        Ok(match *self {
            HyperParams::Ridge { lambda } => FittedModel::Ridge(ridge_fit(x, y, lambda)?),
            HyperParams::Lasso { lambda } => FittedModel::Lasso(lasso_fit(x, y, lambda)?),
            HyperParams::Gpr { sigma_f2, length_scale, sigma_n2 } => {
                FittedModel::Gpr(gpr_fit(x, y, sigma_f2, length_scale, sigma_n2)?)
            }
        })
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Ridge(RidgeModel),
    Lasso(LassoModel),
    Gpr(GprModel),
}

impl FittedModel {
    pub fn kind(&self) -> RegressorKind {
        match self {
            FittedModel::Ridge(_) => RegressorKind::Ridge,
            FittedModel::Lasso(_) => RegressorKind::Lasso,
            FittedModel::Gpr(_) => RegressorKind::Gpr,
        }
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, RegressError> {
        match self {
            FittedModel::Ridge(m) => m.predict(x),
            FittedModel::Lasso(m) => m.predict(x),
            FittedModel::Gpr(m) => Ok(m.predict(x)?.0),
        }
    }

    /// Versioned JSON document.
    pub fn to_json(&self) -> String {
        let doc = ModelDocumentRef { format_version: MODEL_FORMAT_VERSION, model: self };
        serde_json::to_string_pretty(&doc).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, RegressError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| RegressError::Document(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(RegressError::Document(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format_version: u32,
    model: &'a FittedModel,
}

#[derive(Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: FittedModel,
}

/// Feature and target min-max scaling wrapped around a fitted model. Predictions
/// come back in the original target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledRegressor {
    pub hyper: HyperParams,
    pub x_scaler: MinMaxScaler,
    pub y_scaler: MinMaxScaler,
    pub model: FittedModel,
}

impl ScaledRegressor {
    pub fn fit(hyper: HyperParams, x: &DesignMatrix, y: &[f64]) -> Result<Self, RegressError> {
        check_target(x, y)?;
        let x_scaler = MinMaxScaler::fit(x);
        let y_scaler = MinMaxScaler::fit_vector(y);
        let xs = x_scaler.apply(x)?;
        let ys = y_scaler.apply_vector(y);
        let model = hyper.fit(&xs, &ys)?;
        Ok(Self { hyper, x_scaler, y_scaler, model })
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, RegressError> {
        let xs = self.x_scaler.apply(x)?;
        let ys = self.model.predict(&xs)?;
        Ok(self.y_scaler.invert_vector(&ys))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_matrix_validation() {
        assert_eq!(DesignMatrix::new(0, 1, vec![]), Err(RegressError::EmptyMatrix));
        assert!(DesignMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            DesignMatrix::new(2, 2, vec![1.0, 2.0, f64::INFINITY, 0.0]),
            Err(RegressError::NonFinite { row: 1, col: 0 })
        );
        let m = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(1), vec![2.0, 4.0]);
        assert!(DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn hyper_from_named_points() {
        let h = RegressorKind::Gpr
            .hyper_from(&[
                ("length_scale".into(), 0.3),
                ("sigma_f2".into(), 1.0),
                ("sigma_n2".into(), 0.01),
            ])
            .unwrap();
        assert_eq!(h, HyperParams::Gpr { sigma_f2: 1.0, length_scale: 0.3, sigma_n2: 0.01 });
        assert!(RegressorKind::Ridge.hyper_from(&[("alpha".into(), 1.0)]).is_err());
        assert!(RegressorKind::Ridge.hyper_from(&[("lambda".into(), -1.0)]).is_err());
        assert!(RegressorKind::Lasso.hyper_from(&[]).is_err());
    }

    #[test]
    fn default_grids() {
        let ridge = RegressorKind::Ridge.default_grid();
        assert_eq!(ridge.len(), 7);
        let pts = ridge.points();
        assert!((pts[0][0].1 - 1e-4).abs() < 1e-18);
        assert!((pts[6][0].1 - 100.0).abs() < 1e-12);
        assert_eq!(RegressorKind::Gpr.default_grid().len(), 36);
    }

    #[test]
    fn kinds_parse_and_print() {
        for k in RegressorKind::ALL {
            assert_eq!(k.to_string().parse::<RegressorKind>().unwrap(), k);
        }
        assert!("svr".parse::<RegressorKind>().is_err());
    }

    #[test]
    fn document_round_trip_for_every_kind() {
        let x = DesignMatrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.3, 0.2],
            vec![0.9, 0.5],
            vec![0.4, 0.8],
            vec![0.7, 0.1],
        ])
        .unwrap();
        let y = [1.0, 0.4, 0.3, 0.9, 0.2];
        let probe = DesignMatrix::from_rows(&[vec![0.25, 0.6], vec![0.8, 0.9]]).unwrap();
        let hypers = [
            HyperParams::Ridge { lambda: 0.1 },
            HyperParams::Lasso { lambda: 0.01 },
            HyperParams::Gpr { sigma_f2: 1.0, length_scale: 0.5, sigma_n2: 1e-3 },
        ];
        for h in hypers {
            let model = h.fit(&x, &y).unwrap();
            let back = FittedModel::from_json(&model.to_json()).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&probe).unwrap(), model.predict(&probe).unwrap());
        }
        assert!(FittedModel::from_json(r#"{"format_version":9,"model":{"kind":"ridge"}}"#).is_err());
    }

    #[test]
    fn scaled_regressor_predicts_in_original_units() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 10.0]).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..20).map(|i| 500.0 + 3.0 * i as f64 * 10.0).collect();
        let reg = ScaledRegressor::fit(HyperParams::Ridge { lambda: 0.0 }, &x, &y).unwrap();
        let p = reg.predict(&DesignMatrix::from_rows(&[vec![55.0]]).unwrap()).unwrap();
        assert!((p[0] - 665.0).abs() < 1e-9);
    }
}
