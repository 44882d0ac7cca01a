//! Two-stage cascade around a calibrated abcd model.
//!
//! Stage 1 predicts ET from `(SM_{t-1}, P_t, PET_t)`. Stage 2 predicts Q from
//! `(SM_{t-1}, SM_t, GW_t, GW_{t-1}, P_t, ET_t)`, where the storages come from
//! the abcd simulation and `ET_t` is the stage-1 output at prediction time.
//! A plain `(P_t, T_t) -> Q_t` regressor is provided as the baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abcd::{simulate, AbcdParams, AbcdState, Forcing, SimStep};
use crate::calib::CalibrationResult;
use crate::regress::{grid_search, DesignMatrix, ParamGrid, RegressError, RegressorKind, ScaledRegressor};
use crate::timeseries::MonthKey;

pub const PIML_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_K_FOLDS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PimlError {
    #[error("observed {column} has {got} values but the forcing has {expected} months")]
    Length { column: &'static str, expected: usize, got: usize },
    #[error("observed {column} is missing for {key}")]
    MissingObservation { column: &'static str, key: MonthKey },
    #[error("warm-up of {warmup} months leaves only {rows} training rows")]
    TooFewRows { warmup: usize, rows: usize },
    #[error("invalid {what}: {value}")]
    Setting { what: &'static str, value: String },
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("model document: {0}")]
    Document(String),
}

/// Stage-1 covariates, in this column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Row {
    pub sm_prev: f64,
    pub p: f64,
    pub pet: f64,
}

impl Stage1Row {
    pub const COLUMNS: [&'static str; 3] = ["sm_prev", "p", "pet"];

    pub fn to_array(self) -> [f64; 3] {
        [self.sm_prev, self.p, self.pet]
    }
}

/// Stage-2 covariates, in this column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Row {
    pub sm_prev: f64,
    pub sm: f64,
    pub gw: f64,
    pub gw_prev: f64,
    pub p: f64,
    pub et: f64,
}

impl Stage2Row {
    pub const COLUMNS: [&'static str; 6] = ["sm_prev", "sm", "gw", "gw_prev", "p", "et"];

    pub fn to_array(self) -> [f64; 6] {
        [self.sm_prev, self.sm, self.gw, self.gw_prev, self.p, self.et]
    }
}

/// A stage-2 row before its ET column is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Skeleton {
    pub sm_prev: f64,
    pub sm: f64,
    pub gw: f64,
    pub gw_prev: f64,
    pub p: f64,
}

impl Stage2Skeleton {
    pub fn with_et(self, et: f64) -> Stage2Row {
        Stage2Row { sm_prev: self.sm_prev, sm: self.sm, gw: self.gw, gw_prev: self.gw_prev, p: self.p, et }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub stage1: Vec<Stage1Row>,
    pub stage2: Vec<Stage2Skeleton>,
    pub trajectory: Vec<SimStep>,
}

/// Runs the simulation once and lays out both covariate tables. Row `t` takes
/// its `_prev` storages from month `t - 1`, or from `init` for the first month.
pub fn build_covariates(params: &AbcdParams, init: AbcdState, forcing: &Forcing) -> Covariates {
    let trajectory = simulate(params, init, forcing);
    let states: Vec<AbcdState> = trajectory.iter().map(|s| s.state).collect();
    let (stage1, stage2) = layout(init, &states, forcing);
    Covariates { stage1, stage2, trajectory }
}

fn layout(init: AbcdState, states: &[AbcdState], forcing: &Forcing) -> (Vec<Stage1Row>, Vec<Stage2Skeleton>) {
    let mut prev = init;
    let mut stage1 = Vec::with_capacity(states.len());
    let mut stage2 = Vec::with_capacity(states.len());
    for (t, s) in states.iter().enumerate() {
        let p = forcing.p()[t];
        stage1.push(Stage1Row { sm_prev: prev.sm, p, pet: forcing.pet()[t] });
        stage2.push(Stage2Skeleton { sm_prev: prev.sm, sm: s.sm, gw: s.gw, gw_prev: prev.gw, p });
        prev = *s;
    }
    (stage1, stage2)
}

/// Which ET feeds the stage-2 training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage2TrainEt {
    #[default]
    Observed,
    /// Stage-1 in-sample predictions, as at prediction time.
    Predicted,
}

impl fmt::Display for Stage2TrainEt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage2TrainEt::Observed => "observed",
            Stage2TrainEt::Predicted => "predicted",
        })
    }
}

impl FromStr for Stage2TrainEt {
    type Err = PimlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "observed" => Ok(Self::Observed),
            "predicted" => Ok(Self::Predicted),
            other => Err(PimlError::Setting { what: "stage2_train_et", value: other.to_string() }),
        }
    }
}

/// Where the SM/GW covariates of the training rows come from. Prediction
/// always uses simulated storages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSource {
    #[default]
    Simulated,
    Observed,
}

impl fmt::Display for StateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateSource::Simulated => "simulated",
            StateSource::Observed => "observed",
        })
    }
}

impl FromStr for StateSource {
    type Err = PimlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "simulated" => Ok(Self::Simulated),
            "observed" => Ok(Self::Observed),
            other => Err(PimlError::Setting { what: "state_source", value: other.to_string() }),
        }
    }
}

/// Observed end-of-month storages, one entry per forcing month.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStates {
    pub sm: Vec<Option<f64>>,
    pub gw: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PimlOptions {
    pub stage2_train_et: Stage2TrainEt,
    /// `Some` switches the training covariates to observed storages.
    pub observed_states: Option<ObservedStates>,
    pub k_folds: usize,
    /// Replaces the kind's default search grid.
    pub grid: Option<ParamGrid>,
    pub init: AbcdState,
}

impl Default for PimlOptions {
    fn default() -> Self {
        Self {
            stage2_train_et: Stage2TrainEt::Observed,
            observed_states: None,
            k_folds: DEFAULT_K_FOLDS,
            grid: None,
            init: AbcdState::default(),
        }
    }
}

impl PimlOptions {
    pub fn state_source(&self) -> StateSource {
        if self.observed_states.is_some() {
            StateSource::Observed
        } else {
            StateSource::Simulated
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimlModel {
    pub abcd_params: AbcdParams,
    pub abcd_init: AbcdState,
    pub regressor_kind: RegressorKind,
    pub warmup_months: usize,
    pub stage2_train_et: Stage2TrainEt,
    pub state_source: StateSource,
    pub stage1: ScaledRegressor,
    pub stage2: ScaledRegressor,
    /// Negative in-sample fitted values over both stages' training rows.
    pub clip_count_train: usize,
}

#[derive(Serialize)]
struct PimlDocumentRef<'a> {
    format_version: u32,
    model: &'a PimlModel,
}

#[derive(Deserialize)]
struct PimlDocument {
    format_version: u32,
    model: PimlModel,
}

impl PimlModel {
    pub fn to_json(&self) -> String {
        let doc = PimlDocumentRef { format_version: PIML_FORMAT_VERSION, model: self };
        serde_json::to_string_pretty(&doc).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, PimlError> {
        let doc: PimlDocument = serde_json::from_str(text).map_err(|e| PimlError::Document(e.to_string()))?;
        if doc.format_version != PIML_FORMAT_VERSION {
            return Err(PimlError::Document(format!("unsupported format_version {}", doc.format_version)));
        }
        Ok(doc.model)
    }
}

fn check_len<T>(column: &'static str, values: &[T], expected: usize) -> Result<(), PimlError> {
    if values.len() != expected {
        return Err(PimlError::Length { column, expected, got: values.len() });
    }
    Ok(())
}

fn required(
    column: &'static str,
    values: &[Option<f64>],
    keys: &[MonthKey],
    range: std::ops::Range<usize>,
) -> Result<Vec<f64>, PimlError> {
    range
        .map(|i| values[i].ok_or(PimlError::MissingObservation { column, key: keys[i] }))
        .collect()
}

fn matrix<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> Result<DesignMatrix, RegressError> {
    let rows: Vec<[f64; N]> = rows.collect();
    DesignMatrix::from_rows(&rows)
}

fn select(kind: RegressorKind, grid: Option<&ParamGrid>, x: &DesignMatrix, y: &[f64], k: usize) -> Result<ScaledRegressor, RegressError> {
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = kind.default_grid();
            &default_grid
        }
    };
    let search = grid_search(kind, grid, x, y, k)?;
    ScaledRegressor::fit(search.best, x, y)
}

fn negatives(values: &[f64]) -> usize {
    values.iter().filter(|v| **v < 0.0).count()
}

fn training_rows(n: usize, warmup: usize, k_folds: usize) -> Result<std::ops::Range<usize>, PimlError> {
    // each of the k + 1 chronological blocks needs two rows
    let rows = n.saturating_sub(warmup);
    if rows < 2 * (k_folds + 1) {
        return Err(PimlError::TooFewRows { warmup, rows });
    }
    Ok(warmup..n)
}

/// Fits both stages on the months after the calibration warm-up. Stage-2
/// training rows carry observed ET unless `stage2_train_et` says otherwise.
pub fn train_piml(
    forcing: &Forcing,
    observed_et: &[Option<f64>],
    observed_q: &[Option<f64>],
    kind: RegressorKind,
    calibration: &CalibrationResult,
    opts: &PimlOptions,
) -> Result<PimlModel, PimlError> {
    let n = forcing.len();
    check_len("et_mm", observed_et, n)?;
    check_len("q_mm", observed_q, n)?;
    let warmup = calibration.warmup_months;
    let rows = training_rows(n, warmup, opts.k_folds)?;
    let keys = forcing.keys();
    let et_obs = required("et_mm", observed_et, keys, rows.clone())?;
    let q_obs = required("q_mm", observed_q, keys, rows.clone())?;

    let params = calibration.params;
    let (stage1_rows, stage2_rows) = match &opts.observed_states {
        None => {
            let c = build_covariates(&params, opts.init, forcing);
            (c.stage1, c.stage2)
        }
        Some(obs) => {
            check_len("sm_mm", &obs.sm, n)?;
            check_len("gw_mm", &obs.gw, n)?;
            // the first training row needs the storages of the month before it
            let from = rows.start.saturating_sub(1);
            let sm = required("sm_mm", &obs.sm, keys, from..n)?;
            let gw = required("gw_mm", &obs.gw, keys, from..n)?;
            let mut states = vec![opts.init; from];
            states.extend(sm.iter().zip(&gw).map(|(&sm, &gw)| AbcdState { sm, gw }));
            layout(opts.init, &states, forcing)
        }
    };

    let x1 = matrix(stage1_rows[rows.clone()].iter().map(|r| r.to_array()))?;
    let stage1 = select(kind, opts.grid.as_ref(), &x1, &et_obs, opts.k_folds)?;
    let et_fit = stage1.predict(&x1)?;

    let et_column: Vec<f64> = match opts.stage2_train_et {
        Stage2TrainEt::Observed => et_obs,
        Stage2TrainEt::Predicted => et_fit.iter().map(|v| v.max(0.0)).collect(),
    };
    let x2 = matrix(stage2_rows[rows].iter().zip(&et_column).map(|(s, &et)| s.with_et(et).to_array()))?;
    let stage2 = select(kind, opts.grid.as_ref(), &x2, &q_obs, opts.k_folds)?;
    let q_fit = stage2.predict(&x2)?;

    Ok(PimlModel {
        abcd_params: params,
        abcd_init: opts.init,
        regressor_kind: kind,
        warmup_months: warmup,
        stage2_train_et: opts.stage2_train_et,
        state_source: opts.state_source(),
        stage1,
        stage2,
        clip_count_train: negatives(&et_fit) + negatives(&q_fit),
    })
}

/// Whether negative outputs are clamped to zero. `Off` exists to audit clip
/// counts against the raw outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    #[default]
    Clip,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClipReport {
    pub et: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PimlPrediction {
    pub keys: Vec<MonthKey>,
    pub et_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub et_raw: Vec<f64>,
    pub q_raw: Vec<f64>,
    /// The stage-2 rows that produced `q_raw`.
    pub stage2_rows: Vec<Stage2Row>,
    pub clip: ClipReport,
}

impl PimlPrediction {
    /// Restricts to `range`, recounting clips over that span only.
    pub fn slice(&self, range: std::ops::Range<usize>) -> PimlPrediction {
        let et_raw = self.et_raw[range.clone()].to_vec();
        let q_raw = self.q_raw[range.clone()].to_vec();
        PimlPrediction {
            keys: self.keys[range.clone()].to_vec(),
            et_hat: self.et_hat[range.clone()].to_vec(),
            q_hat: self.q_hat[range.clone()].to_vec(),
            stage2_rows: self.stage2_rows[range].to_vec(),
            clip: ClipReport { et: negatives(&et_raw), q: negatives(&q_raw) },
            et_raw,
            q_raw,
        }
    }
}

fn clip(raw: &[f64], mode: ClipMode) -> Vec<f64> {
    match mode {
        ClipMode::Clip => raw.iter().map(|v| v.max(0.0)).collect(),
        ClipMode::Off => raw.to_vec(),
    }
}

/// Runs the cascade over the whole forcing from the model's initial storages.
/// The forcing carries no observations, so nothing observed can leak in.
pub fn predict_piml(model: &PimlModel, forcing: &Forcing) -> Result<PimlPrediction, PimlError> {
    predict_piml_with(model, forcing, ClipMode::Clip)
}

pub fn predict_piml_with(model: &PimlModel, forcing: &Forcing, mode: ClipMode) -> Result<PimlPrediction, PimlError> {
    let cov = build_covariates(&model.abcd_params, model.abcd_init, forcing);
    let x1 = matrix(cov.stage1.iter().map(|r| r.to_array()))?;
    let et_raw = model.stage1.predict(&x1)?;
    let et_hat = clip(&et_raw, mode);

    let stage2_rows: Vec<Stage2Row> = cov.stage2.iter().zip(&et_hat).map(|(s, &et)| s.with_et(et)).collect();
    let x2 = matrix(stage2_rows.iter().map(|r| r.to_array()))?;
    let q_raw = model.stage2.predict(&x2)?;
    let q_hat = clip(&q_raw, mode);

    Ok(PimlPrediction {
        keys: forcing.keys().to_vec(),
        clip: ClipReport { et: negatives(&et_raw), q: negatives(&q_raw) },
        et_hat,
        q_hat,
        et_raw,
        q_raw,
        stage2_rows,
    })
}

/// `(P_t, T_t) -> Q_t` regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlBaseline {
    pub regressor_kind: RegressorKind,
    pub warmup_months: usize,
    pub model: ScaledRegressor,
    pub clip_count_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePrediction {
    pub keys: Vec<MonthKey>,
    pub q_hat: Vec<f64>,
    pub q_raw: Vec<f64>,
    pub clip_count: usize,
}

impl BaselinePrediction {
    pub fn slice(&self, range: std::ops::Range<usize>) -> BaselinePrediction {
        let q_raw = self.q_raw[range.clone()].to_vec();
        BaselinePrediction {
            keys: self.keys[range.clone()].to_vec(),
            q_hat: self.q_hat[range].to_vec(),
            clip_count: negatives(&q_raw),
            q_raw,
        }
    }
}

fn baseline_matrix(forcing: &Forcing, range: std::ops::Range<usize>) -> Result<DesignMatrix, RegressError> {
    matrix(range.map(|i| [forcing.p()[i], forcing.t()[i]]))
}

/// Same rows, scaling, search and clipping conventions as the cascade.
pub fn train_ml_baseline(
    forcing: &Forcing,
    observed_q: &[Option<f64>],
    kind: RegressorKind,
    warmup_months: usize,
    opts: &PimlOptions,
) -> Result<MlBaseline, PimlError> {
    let n = forcing.len();
    check_len("q_mm", observed_q, n)?;
    let rows = training_rows(n, warmup_months, opts.k_folds)?;
    let q_obs = required("q_mm", observed_q, forcing.keys(), rows.clone())?;
    let x = baseline_matrix(forcing, rows)?;
    let model = select(kind, opts.grid.as_ref(), &x, &q_obs, opts.k_folds)?;
    let fit = model.predict(&x)?;
    Ok(MlBaseline { regressor_kind: kind, warmup_months, clip_count_train: negatives(&fit), model })
}

pub fn predict_ml_baseline(baseline: &MlBaseline, forcing: &Forcing) -> Result<BaselinePrediction, PimlError> {
    let x = baseline_matrix(forcing, 0..forcing.len())?;
    let q_raw = baseline.model.predict(&x)?;
    Ok(BaselinePrediction {
        keys: forcing.keys().to_vec(),
        q_hat: clip(&q_raw, ClipMode::Clip),
        clip_count: negatives(&q_raw),
        q_raw,
    })
}
