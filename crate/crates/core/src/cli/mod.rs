//! Batch commands behind the `abcd-piml` binary. Each `cmd_*` function returns
//! the files it would write; [`run`] writes them under `--out` or prints the
//! main one to stdout.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::abcd::{simulate, trajectory_csv, Forcing, ForcingError};
use crate::calib::{calibrate, CalibError, CalibrationOptions, CalibrationResult};
use crate::metrics::{MetricError, SkillScores};
use crate::pet::{resolve_pet, PetError};
use crate::piml::{
    predict_ml_baseline, predict_piml, train_ml_baseline, train_piml, ObservedStates, PimlError, PimlOptions,
    StateSource,
};
use crate::report::{
    prediction_csv, BaselineReport, EvaluationReport, ModelReport, Periods, PetSource, PimlReport, Provenance,
    Settings,
};
use crate::synthetic::{generate, SyntheticError, SyntheticSpec};
use crate::timeseries::{parse_forcing_csv_with, CsvError, MonthKey, MonthlySeries, ParseOptions, SeriesError};

pub use config::{parse_params, ConfigError, LoadError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: CsvError },
    #[error("{}: not a calibration document: {message}", path.display())]
    CalibrationFile { path: PathBuf, message: String },
    #[error("no `{0}` given (config key or flag)")]
    Missing(&'static str),
    #[error("test period: observed {column} missing for {key}")]
    MissingTestObservation { column: &'static str, key: MonthKey },
    #[error(transparent)]
    Pet(#[from] PetError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Piml(#[from] PimlError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Files produced by a command, in write order. The first is the one printed
/// when no output directory is given.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Forcing file after parsing and PET resolution.
#[derive(Debug, Clone)]
pub struct LoadedForcing {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub series: MonthlySeries,
    pub forcing: Forcing,
    pub pet_source: PetSource,
    pub warnings: Vec<String>,
}

pub fn load_forcing(cfg: &RunConfig) -> Result<LoadedForcing, CliError> {
    let path = cfg.forcing.clone().ok_or(CliError::Missing("forcing"))?;
    let bytes = std::fs::read(&path).map_err(|e| CliError::Read { path: path.clone(), source: e })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Read {
        path: path.clone(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    let parsed = parse_forcing_csv_with(&text, ParseOptions { area_km2: cfg.area_km2 })
        .map_err(|e| CliError::Csv { path: path.clone(), source: e })?;
    let series = parsed.series;
    let pet_source =
        if series.records().iter().all(|r| r.pet_mm.is_some()) { PetSource::Column } else { PetSource::Hamon };
    let pet = resolve_pet(&series, cfg.latitude_deg)?;
    let forcing = Forcing::from_series(&series, pet)?;
    Ok(LoadedForcing { path, bytes, series, forcing, pet_source, warnings: parsed.warnings })
}

fn read_calibration(path: &Path) -> Result<(CalibrationResult, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Read { path: path.to_path_buf(), source: e })?;
    let text = String::from_utf8_lossy(&bytes);
    let result = CalibrationResult::from_json(&text)
        .map_err(|e| CliError::CalibrationFile { path: path.to_path_buf(), message: e.to_string() })?;
    Ok((result, bytes))
}

/// Monthly fluxes for `params` (or the parameters of `calibration`).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let params = match (cfg.params, &cfg.calibration) {
        (Some(p), _) => p,
        (None, Some(path)) => read_calibration(path)?.0.params,
        (None, None) => return Err(CliError::Missing("params")),
    };
    let input = load_forcing(cfg)?;
    let traj = simulate(&params, cfg.init, &input.forcing);
    Ok(CommandOutput {
        files: vec![("trajectory.csv".into(), trajectory_csv(input.forcing.keys(), &traj))],
        warnings: input.warnings,
    })
}

fn training_span(series: &MonthlySeries, split: Option<MonthKey>) -> Result<usize, CliError> {
    match split {
        Some(k) => Ok(series.split_at(k)?.0.len()),
        None => Ok(series.len()),
    }
}

fn calibration_options(cfg: &RunConfig) -> CalibrationOptions {
    CalibrationOptions { warmup_months: cfg.warmup_months, ..Default::default() }
}

/// Calibrates on the months before `split` (all months if unset).
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let input = load_forcing(cfg)?;
    let n_train = training_span(&input.series, cfg.split)?;
    let train = input.forcing.slice(0..n_train)?;
    let q = input.series.observed_q();
    let result = calibrate(&train, &q[..n_train], &calibration_options(cfg))?;
    Ok(CommandOutput {
        files: vec![("calibration.json".into(), format!("{}\n", result.to_json()))],
        warnings: input.warnings,
    })
}

/// Report plus every file `evaluate` writes.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub output: CommandOutput,
}

fn test_values(
    column: &'static str,
    values: &[Option<f64>],
    keys: &[MonthKey],
) -> Result<Vec<f64>, CliError> {
    values
        .iter()
        .zip(keys)
        .map(|(v, &key)| v.ok_or(CliError::MissingTestObservation { column, key }))
        .collect()
}

/// Trains the baseline and the cascade for each regressor kind on the months
/// before `split` and scores both on the months from `split` on.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Evaluation, CliError> {
    let split = cfg.split.ok_or(CliError::Missing("split"))?;
    let input = load_forcing(cfg)?;
    let series = &input.series;
    let n = series.len();
    let n_train = training_span(series, Some(split))?;
    let full = &input.forcing;
    let train = full.slice(0..n_train)?;
    let keys = full.keys();
    let test_keys = &keys[n_train..];
    let q = series.observed_q();
    let et = series.observed_et();
    let q_test = test_values("q_mm", &q[n_train..], test_keys)?;
    let et_test = test_values("et_mm", &et[n_train..], test_keys)?;

    let (calibration, calibration_bytes) = match &cfg.calibration {
        Some(path) => {
            let (c, bytes) = read_calibration(path)?;
            (c, Some(bytes))
        }
        None => (calibrate(&train, &q[..n_train], &calibration_options(cfg))?, None),
    };

    let observed_states = match cfg.state_source {
        StateSource::Simulated => None,
        StateSource::Observed => Some(ObservedStates {
            sm: series.observed_sm()[..n_train].to_vec(),
            gw: series.observed_gw()[..n_train].to_vec(),
        }),
    };

    let mut models = Vec::new();
    let mut files = Vec::new();
    for &kind in &cfg.regressors {
        let opts = PimlOptions {
            stage2_train_et: cfg.stage2_train_et,
            observed_states: observed_states.clone(),
            k_folds: cfg.k_folds,
            grid: Some(cfg.grid(kind)),
            init: cfg.init,
        };
        let model = train_piml(&train, &et[..n_train], &q[..n_train], kind, &calibration, &opts)?;
        let pred = predict_piml(&model, full)?.slice(n_train..n);
        let baseline = train_ml_baseline(&train, &q[..n_train], kind, calibration.warmup_months, &opts)?;
        let base_pred = predict_ml_baseline(&baseline, full)?.slice(n_train..n);

        models.push(ModelReport {
            regressor: kind,
            baseline: BaselineReport {
                q: SkillScores::compute(&q_test, &base_pred.q_hat)?,
                clip_count: base_pred.clip_count,
                clip_count_train: baseline.clip_count_train,
                hyper: baseline.model.hyper,
            },
            piml: PimlReport {
                et: SkillScores::compute(&et_test, &pred.et_hat)?,
                q: SkillScores::compute(&q_test, &pred.q_hat)?,
                clip: pred.clip,
                clip_count_train: model.clip_count_train,
                stage1_hyper: model.stage1.hyper,
                stage2_hyper: model.stage2.hyper,
            },
        });
        files.push((format!("predictions_{kind}_piml_q.csv"), prediction_csv(test_keys, &q_test, &pred.q_hat)));
        files.push((format!("predictions_{kind}_piml_et.csv"), prediction_csv(test_keys, &et_test, &pred.et_hat)));
        files.push((format!("predictions_{kind}_baseline_q.csv"), prediction_csv(test_keys, &q_test, &base_pred.q_hat)));
        files.push((format!("piml_{kind}.json"), format!("{}\n", model.to_json())));
    }

    let report = EvaluationReport {
        provenance: Provenance::new(&cfg.canonical(), &input.bytes, calibration_bytes.as_deref()),
        periods: Periods {
            train_start: keys[0],
            train_end: keys[n_train - 1],
            test_start: keys[n_train],
            test_end: keys[n - 1],
            warmup_months: calibration.warmup_months,
        },
        settings: Settings {
            pet_source: input.pet_source,
            latitude_deg: cfg.latitude_deg,
            stage2_train_et: cfg.stage2_train_et,
            state_source: cfg.state_source,
            k_folds: cfg.k_folds,
        },
        calibration,
        models,
    };
    let mut all = vec![("report.md".to_string(), report.to_markdown()), ("report.json".to_string(), report.to_json())];
    all.push(("calibration.json".into(), format!("{}\n", report.calibration.to_json())));
    all.extend(files);
    Ok(Evaluation { report, output: CommandOutput { files: all, warnings: input.warnings } })
}

/// Synthetic catchment in the ingestion schema, every column filled.
pub fn cmd_gen_synthetic(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let params = cfg.params.ok_or(CliError::Missing("params"))?;
    let base = SyntheticSpec::monsoon(params, cfg.seed);
    let spec = SyntheticSpec {
        start: cfg.start,
        months: cfg.months,
        init: cfg.init,
        latitude_deg: cfg.latitude_deg.unwrap_or(base.latitude_deg),
        q_noise: cfg.q_noise,
        ..base
    };
    let series = generate(&spec)?;
    Ok(CommandOutput { files: vec![("synthetic_catchment.csv".into(), series.to_csv())], warnings: Vec::new() })
}

#[derive(Parser, Debug)]
#[command(name = "abcd-piml", version, about = "abcd water balance, calibration and PIML streamflow cascade")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the abcd model and write monthly fluxes and storages.
    Simulate(SimulateArgs),
    /// Fit a, b, c, d to observed streamflow on the training months.
    Calibrate(CalibrateArgs),
    /// Train baseline and PIML models per regressor and score the test months.
    Evaluate(EvaluateArgs),
    /// Write a synthetic monsoon catchment generated by the abcd model.
    GenSynthetic(SyntheticArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; without it the main output goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    /// Latitude in degrees, for Hamon PET when the forcing has no pet_mm column.
    #[arg(long, allow_hyphen_values = true)]
    pub latitude: Option<String>,
    /// `a,b,c,d`.
    #[arg(long)]
    pub params: Option<String>,
    /// Calibration JSON to take parameters from.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub latitude: Option<String>,
    /// First test month `YYYY-MM`; calibration uses the months before it.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub latitude: Option<String>,
    #[arg(long)]
    pub split: Option<String>,
    /// Comma-separated subset of ridge,lasso,gpr.
    #[arg(long)]
    pub regressors: Option<String>,
    /// Reuse a calibration JSON instead of calibrating inline.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SyntheticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `a,b,c,d`.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of multiplicative noise on streamflow.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub months: Option<usize>,
    /// First month `YYYY-MM`.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub latitude: Option<String>,
}

#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn add(&mut self, key: &str, value: Option<impl ToString>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &str, value: &Option<PathBuf>) -> &mut Self {
        self.add(key, value.as_ref().map(|p| p.display().to_string()))
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Calibrate(a) => &a.common,
            Command::Evaluate(a) => &a.common,
            Command::GenSynthetic(a) => &a.common,
        }
    }

    /// Flag values as config key/value pairs.
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Overrides::default();
        o.path("out", &self.common().out);
        match self {
            Command::Simulate(a) => {
                o.path("forcing", &a.forcing).add("latitude", a.latitude.as_ref()).add("params", a.params.as_ref());
                o.path("calibration", &a.calibration);
            }
            Command::Calibrate(a) => {
                o.path("forcing", &a.forcing).add("latitude", a.latitude.as_ref()).add("split", a.split.as_ref());
            }
            Command::Evaluate(a) => {
                o.path("forcing", &a.forcing).add("latitude", a.latitude.as_ref()).add("split", a.split.as_ref());
                o.add("regressors", a.regressors.as_ref()).path("calibration", &a.calibration);
            }
            Command::GenSynthetic(a) => {
                o.add("params", a.params.as_ref()).add("seed", a.seed).add("q_noise", a.noise.as_ref());
                o.add("months", a.months).add("start", a.start.as_ref()).add("latitude", a.latitude.as_ref());
            }
        }
        o.0
    }

    pub fn config(&self) -> Result<RunConfig, CliError> {
        Ok(RunConfig::load(self.common().config.as_deref(), &self.overrides())?)
    }
}

/// Writes each file under `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, output: &CommandOutput) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), source: e })?;
    output
        .files
        .iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::Write { path: path.clone(), source: e })?;
            Ok(path)
        })
        .collect()
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.command.config()?;
    let output = match &cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg)?,
        Command::Calibrate(_) => cmd_calibrate(&cfg)?,
        Command::Evaluate(_) => cmd_evaluate(&cfg)?.output,
        Command::GenSynthetic(_) => cmd_gen_synthetic(&cfg)?,
    };
    let io = |e| CliError::Write { path: PathBuf::from("<stdout>"), source: e };
    for w in &output.warnings {
        writeln!(stderr, "warning: {w}").map_err(io)?;
    }
    match &cfg.out {
        Some(dir) => {
            for path in write_outputs(dir, &output)? {
                writeln!(stderr, "wrote {}", path.display()).map_err(io)?;
            }
        }
        None => {
            if let Some((_, main)) = output.files.first() {
                stdout.write_all(main.as_bytes()).map_err(io)?;
            }
        }
    }
    Ok(())
}
