use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DesignMatrix, HyperParams, RegressError, RegressorKind, ScaledRegressor};

/// Named value lists; points enumerate the Cartesian product with the first
/// axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    axes: Vec<(String, Vec<f64>)>,
}

impl ParamGrid {
    pub fn new(axes: Vec<(String, Vec<f64>)>) -> Self {
        Self { axes }
    }

    pub fn axes(&self) -> &[(String, Vec<f64>)] {
        &self.axes
    }

    /// Replaces (or adds) one axis.
    pub fn set_axis(&mut self, name: &str, values: Vec<f64>) {
        match self.axes.iter_mut().find(|(n, _)| n == name) {
            Some(axis) => axis.1 = values,
            None => self.axes.push((name.to_string(), values)),
        }
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            return 0;
        }
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        if self.axes.is_empty() {
            return Vec::new();
        }
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((name.clone(), v));
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// One forward-chaining fold: train on all rows before the validation block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Splits `n` rows into `k + 1` contiguous blocks; fold `i` trains on blocks
/// `0..i` and validates on block `i`. Validation rows always postdate every
/// training row.
pub fn chronological_folds(n: usize, k: usize) -> Result<Vec<Fold>, RegressError> {
    if k < 2 {
        return Err(RegressError::InvalidHyper(format!("k_folds = {k} must be >= 2")));
    }
    let blocks = k + 1;
    let bound = |i: usize| i * n / blocks;
    let smallest = (0..blocks).map(|i| bound(i + 1) - bound(i)).min().unwrap_or(0);
    if smallest < 2 {
        return Err(RegressError::FoldTooSmall { fold: 0, rows: smallest });
    }
    Ok((1..=k)
        .map(|i| Fold { train: 0..bound(i), validation: bound(i)..bound(i + 1) })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub point: Vec<(String, f64)>,
    /// Validation RMSE per fold, in target units. Empty when fitting failed.
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: HyperParams,
    pub best_index: usize,
    pub folds: Vec<Fold>,
    pub table: Vec<CvRow>,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

fn evaluate_point(
    hyper: HyperParams,
    x: &DesignMatrix,
    y: &[f64],
    folds: &[Fold],
) -> Result<Vec<f64>, RegressError> {
    folds
        .iter()
        .map(|f| {
            let model = ScaledRegressor::fit(hyper, &x.slice_rows(f.train.clone())?, &y[f.train.clone()])?;
            let pred = model.predict(&x.slice_rows(f.validation.clone())?)?;
            Ok(rmse(&pred, &y[f.validation.clone()]))
        })
        .collect()
}

/// Scores every grid point by mean validation RMSE over chronological folds and
/// picks the smallest; ties go to the earlier point. Points whose fit fails are
/// recorded and skipped.
pub fn grid_search(
    kind: RegressorKind,
    grid: &ParamGrid,
    x: &DesignMatrix,
    y: &[f64],
    k_folds: usize,
) -> Result<GridSearchResult, RegressError> {
    super::check_target(x, y)?;
    let folds = chronological_folds(x.rows(), k_folds)?;
    let points = grid.points();
    if points.is_empty() {
        return Err(RegressError::InvalidHyper("empty grid".into()));
    }
    let hypers = points
        .iter()
        .map(|p| kind.hyper_from(p))
        .collect::<Result<Vec<_>, _>>()?;

    let scores: Vec<Result<Vec<f64>, RegressError>> = std::thread::scope(|s| {
        let handles: Vec<_> = hypers
            .iter()
            .map(|&h| {
                let folds = &folds;
                s.spawn(move || evaluate_point(h, x, y, folds))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
    });

    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    let mut first_error = None;
    for (i, (point, score)) in points.into_iter().zip(scores).enumerate() {
        match score {
            Ok(fold_rmse) => {
                let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
                if mean_rmse.is_finite() && best.is_none_or(|(_, b)| mean_rmse < b) {
                    best = Some((i, mean_rmse));
                }
                table.push(CvRow { point, fold_rmse, mean_rmse: Some(mean_rmse), error: None });
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
                table.push(CvRow { point, fold_rmse: Vec::new(), mean_rmse: None, error: Some(e.to_string()) });
            }
        }
    }
    let (best_index, _) =
        best.ok_or_else(|| RegressError::AllGridPointsFailed(first_error.unwrap_or_default()))?;
    Ok(GridSearchResult { best: hypers[best_index], best_index, folds, table })
}
