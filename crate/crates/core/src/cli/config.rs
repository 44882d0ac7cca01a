//! Flat `key = value` run configuration. Command-line flags are applied as
//! the same key/value pairs after the file, so they win.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::abcd::{AbcdParams, AbcdState};
use crate::calib::DEFAULT_WARMUP_MONTHS;
use crate::piml::{StateSource, Stage2TrainEt, DEFAULT_K_FOLDS};
use crate::regress::{ParamGrid, RegressorKind};
use crate::timeseries::MonthKey;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
}

/// Everything a command may need. Unused keys are ignored by commands that do
/// not need them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub forcing: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Previously written calibration JSON; `evaluate` calibrates inline without it.
    pub calibration: Option<PathBuf>,
    pub latitude_deg: Option<f64>,
    pub area_km2: Option<f64>,
    pub split: Option<MonthKey>,
    pub warmup_months: usize,
    pub regressors: Vec<RegressorKind>,
    /// Per-kind grid with the listed axes replaced.
    pub grids: BTreeMap<RegressorKind, ParamGrid>,
    pub stage2_train_et: Stage2TrainEt,
    pub state_source: StateSource,
    pub k_folds: usize,
    pub params: Option<AbcdParams>,
    pub init: AbcdState,
    pub seed: u64,
    pub q_noise: f64,
    pub months: usize,
    pub start: MonthKey,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            forcing: None,
            out: None,
            calibration: None,
            latitude_deg: None,
            area_km2: None,
            split: None,
            warmup_months: DEFAULT_WARMUP_MONTHS,
            regressors: RegressorKind::ALL.to_vec(),
            grids: BTreeMap::new(),
            stage2_train_et: Stage2TrainEt::Observed,
            state_source: StateSource::Simulated,
            k_folds: DEFAULT_K_FOLDS,
            params: None,
            init: AbcdState::default(),
            seed: 0,
            q_noise: 0.0,
            months: 432,
            start: MonthKey::new(1979, 1).expect("valid month"),
        }
    }
}

fn value_err(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value { key: key.to_string(), message: message.to_string() }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| value_err(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(value_err(key, "must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| value_err(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let xs = v.split(',').map(|s| parse_f64(key, s.trim())).collect::<Result<Vec<_>, _>>()?;
    if xs.is_empty() {
        return Err(value_err(key, "empty list"));
    }
    Ok(xs)
}

/// `a,b,c,d`.
pub fn parse_params(v: &str) -> Result<AbcdParams, ConfigError> {
    let xs = parse_list("params", v)?;
    let arr: [f64; 4] = xs.try_into().map_err(|_| value_err("params", "expected four values a,b,c,d"))?;
    AbcdParams::from_array(arr).map_err(|e| value_err("params", e))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses a configuration document on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.trim().to_string() })?;
            let key = key.trim();
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key: key.to_string() });
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    /// Reads `path` if given, otherwise starts from the defaults, then applies
    /// the overrides in order. Relative paths inside the file resolve against
    /// its directory; override paths are taken as given.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, LoadError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| LoadError::Io { path: p.to_path_buf(), source: e })?;
                let mut cfg =
                    Self::parse(&text).map_err(|e| LoadError::Config { path: Some(p.to_path_buf()), source: e })?;
                // paths in the file are relative to the file itself
                let base = p.parent().unwrap_or(Path::new(""));
                for slot in [&mut cfg.forcing, &mut cfg.out, &mut cfg.calibration] {
                    if let Some(rel) = slot.as_ref().filter(|q| q.is_relative()) {
                        *slot = Some(base.join(rel));
                    }
                }
                cfg
            }
            None => Self::default(),
        };
        for (k, v) in overrides {
            cfg.set(k, v).map_err(|e| LoadError::Config { path: None, source: e })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let path = || if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key {
            "forcing" => self.forcing = path(),
            "out" => self.out = path(),
            "calibration" => self.calibration = path(),
            "latitude" => {
                let lat = parse_f64(key, v)?;
                if !(-66.0..=66.0).contains(&lat) {
                    return Err(value_err(key, format!("{lat} is outside [-66, 66]")));
                }
                self.latitude_deg = Some(lat);
            }
            "area_km2" => {
                let a = parse_f64(key, v)?;
                if a <= 0.0 {
                    return Err(value_err(key, "must be > 0"));
                }
                self.area_km2 = Some(a);
            }
            "split" => self.split = Some(v.parse().map_err(|e| value_err(key, e))?),
            "warmup_months" => self.warmup_months = parse_usize(key, v)?,
            "regressors" => {
                let mut kinds = Vec::new();
                for s in v.split(',') {
                    let k: RegressorKind = s.parse().map_err(|e| value_err(key, e))?;
                    if !kinds.contains(&k) {
                        kinds.push(k);
                    }
                }
                self.regressors = kinds;
            }
            "stage2_train_et" => self.stage2_train_et = v.parse().map_err(|e| value_err(key, e))?,
            "state_source" => self.state_source = v.parse().map_err(|e| value_err(key, e))?,
            "k_folds" => {
                self.k_folds = parse_usize(key, v)?;
                if self.k_folds < 2 {
                    return Err(value_err(key, "must be >= 2"));
                }
            }
            "params" => self.params = Some(parse_params(v)?),
            "init_sm" | "init_gw" => {
                let x = parse_f64(key, v)?;
                let (sm, gw) = if key == "init_sm" { (x, self.init.gw) } else { (self.init.sm, x) };
                self.init = AbcdState::new(sm, gw).map_err(|e| value_err(key, e))?;
            }
            "seed" => self.seed = v.parse().map_err(|_| value_err(key, format!("`{v}` is not an unsigned integer")))?,
            "q_noise" => {
                self.q_noise = parse_f64(key, v)?;
                if self.q_noise < 0.0 {
                    return Err(value_err(key, "must be >= 0"));
                }
            }
            "months" => self.months = parse_usize(key, v)?,
            "start" => self.start = v.parse().map_err(|e| value_err(key, e))?,
            _ => match key.strip_prefix("grid.").and_then(|rest| rest.split_once('.')) {
                Some((kind, axis)) => {
                    let kind: RegressorKind = kind.parse().map_err(|e| value_err(key, e))?;
                    let values = parse_list(key, v)?;
                    let grid = self.grids.entry(kind).or_insert_with(|| kind.default_grid());
                    if !grid.axes().iter().any(|(n, _)| n == axis) {
                        return Err(value_err(key, format!("{kind} has no hyperparameter `{axis}`")));
                    }
                    grid.set_axis(axis, values);
                }
                None => return Err(ConfigError::UnknownKey(key.to_string())),
            },
        }
        Ok(())
    }

    /// Grid used for `kind`: the override if any, else the default.
    pub fn grid(&self, kind: RegressorKind) -> ParamGrid {
        self.grids.get(&kind).cloned().unwrap_or_else(|| kind.default_grid())
    }

    /// Every setting that can change results, one `key = value` per line in a
    /// fixed order. Paths are left out; inputs are hashed by content instead.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(s, "latitude = {}", opt(self.latitude_deg));
        let _ = writeln!(s, "area_km2 = {}", opt(self.area_km2));
        let _ = writeln!(s, "split = {}", self.split.map_or(String::new(), |k| k.to_string()));
        let _ = writeln!(s, "warmup_months = {}", self.warmup_months);
        let kinds: Vec<String> = self.regressors.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "regressors = {}", kinds.join(","));
        for kind in RegressorKind::ALL {
            for (axis, values) in self.grid(kind).axes() {
                let _ = writeln!(s, "grid.{kind}.{axis} = {}", join(values));
            }
        }
        let _ = writeln!(s, "stage2_train_et = {}", self.stage2_train_et);
        let _ = writeln!(s, "state_source = {}", self.state_source);
        let _ = writeln!(s, "k_folds = {}", self.k_folds);
        let _ = writeln!(s, "params = {}", self.params.map_or(String::new(), |p| join(&p.to_array())));
        let _ = writeln!(s, "init_sm = {}", self.init.sm);
        let _ = writeln!(s, "init_gw = {}", self.init.gw);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "q_noise = {}", self.q_noise);
        let _ = writeln!(s, "months = {}", self.months);
        let _ = writeln!(s, "start = {}", self.start);
        s
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}{source}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Config { path: Option<PathBuf>, source: ConfigError },
}
