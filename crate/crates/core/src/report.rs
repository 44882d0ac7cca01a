//! Evaluation reports: the JSON document, markdown skill tables and
//! plot-ready prediction CSVs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calib::CalibrationResult;
use crate::metrics::SkillScores;
use crate::piml::{ClipReport, StateSource, Stage2TrainEt};
use crate::regress::{HyperParams, RegressorKind};
use crate::timeseries::MonthKey;

pub const ARTIFACT_NAME: &str = env!("CARGO_PKG_NAME");
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// JSON Schema for [`EvaluationReport`] documents.
pub const REPORT_SCHEMA: &str = include_str!("../schema/evaluation_report.schema.json");

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub version: String,
    pub report_format: u32,
    /// Hash of the canonical resolved configuration (paths excluded).
    pub config_sha256: String,
    pub forcing_sha256: String,
    pub calibration_sha256: Option<String>,
    /// Every computation is seedless; recorded so readers need not check.
    pub random_free: bool,
}

impl Provenance {
    pub fn new(canonical_config: &str, forcing: &[u8], calibration: Option<&[u8]>) -> Self {
        Self {
            artifact: ARTIFACT_NAME.to_string(),
            version: ARTIFACT_VERSION.to_string(),
            report_format: REPORT_FORMAT_VERSION,
            config_sha256: sha256_hex(canonical_config.as_bytes()),
            forcing_sha256: sha256_hex(forcing),
            calibration_sha256: calibration.map(sha256_hex),
            random_free: true,
        }
    }

    /// Markdown comment block placed at the top of rendered reports.
    pub fn header(&self) -> String {
        let mut s = format!(
            "<!-- {} {} | report format {} | config sha256 {} | forcing sha256 {}",
            self.artifact, self.version, self.report_format, self.config_sha256, self.forcing_sha256
        );
        if let Some(c) = &self.calibration_sha256 {
            let _ = write!(s, " | calibration sha256 {c}");
        }
        s.push_str(" -->\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Periods {
    pub train_start: MonthKey,
    pub train_end: MonthKey,
    pub test_start: MonthKey,
    pub test_end: MonthKey,
    pub warmup_months: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// `column` when the forcing supplied `pet_mm`, else `hamon`.
    pub pet_source: PetSource,
    pub latitude_deg: Option<f64>,
    pub stage2_train_et: Stage2TrainEt,
    pub state_source: StateSource,
    pub k_folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PetSource {
    Column,
    Hamon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub q: SkillScores,
    pub clip_count: usize,
    pub clip_count_train: usize,
    pub hyper: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimlReport {
    pub et: SkillScores,
    pub q: SkillScores,
    pub clip: ClipReport,
    pub clip_count_train: usize,
    pub stage1_hyper: HyperParams,
    pub stage2_hyper: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub regressor: RegressorKind,
    pub baseline: BaselineReport,
    pub piml: PimlReport,
}

/// Test-period skill for every requested regressor kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub provenance: Provenance,
    pub periods: Periods,
    pub settings: Settings,
    pub calibration: CalibrationResult,
    pub models: Vec<ModelReport>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Baseline table (streamflow only).
    pub fn baseline_table(&self) -> MetricTable {
        MetricTable {
            caption: "Performance evaluation of ML models (test period)".into(),
            variables: vec!["Q".into()],
            rows: self
                .models
                .iter()
                .map(|m| MetricRow { label: m.regressor.label().into(), scores: vec![m.baseline.q] })
                .collect(),
        }
    }

    /// Cascade table (ET then streamflow).
    pub fn piml_table(&self) -> MetricTable {
        MetricTable {
            caption: "Performance assessment of PIML models during the test period".into(),
            variables: vec!["ET".into(), "Q".into()],
            rows: self
                .models
                .iter()
                .map(|m| MetricRow { label: m.regressor.label().into(), scores: vec![m.piml.et, m.piml.q] })
                .collect(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let p = &self.periods;
        let c = &self.calibration;
        let [a, b, cc, d] = c.params.to_array();
        let mut s = self.provenance.header();
        let _ = writeln!(s);
        let _ = writeln!(s, "Training {}..{} (first {} months warm-up), test {}..{}.", p.train_start, p.train_end, p.warmup_months, p.test_start, p.test_end);
        let _ = writeln!(s, "Calibrated abcd: a = {a:.4}, b = {b:.4}, c = {cc:.4}, d = {d:.4}; training NSE {:.4}.", c.train_nse);
        let _ = writeln!(s);
        s.push_str(&self.baseline_table().to_markdown());
        let _ = writeln!(s);
        s.push_str(&self.piml_table().to_markdown());
        let _ = writeln!(s);
        let _ = writeln!(s, "| Model | Baseline Q clipped | PIML ET clipped | PIML Q clipped |");
        let _ = writeln!(s, "| --- | ---: | ---: | ---: |");
        for m in &self.models {
            let _ = writeln!(s, "| {} | {} | {} | {} |", m.regressor.label(), m.baseline.clip_count, m.piml.clip.et, m.piml.clip.q);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub label: String,
    /// One entry per table variable.
    pub scores: Vec<SkillScores>,
}

/// RMSE/PBIAS/NSE per variable, one row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub caption: String,
    pub variables: Vec<String>,
    pub rows: Vec<MetricRow>,
}

fn fixed3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

impl MetricTable {
    /// Caption line, a variable header spanning three metric columns each, a
    /// metric-name row, then one row per model. Values use three decimals.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.caption);
        let _ = writeln!(s);
        s.push_str("| Variable |");
        for v in &self.variables {
            let _ = write!(s, " {v} | | |");
        }
        s.push('\n');
        s.push_str("| --- |");
        for _ in &self.variables {
            s.push_str(" ---: | ---: | ---: |");
        }
        s.push('\n');
        s.push_str("| Performance metric |");
        for _ in &self.variables {
            s.push_str(" RMSE | PBIAS | NSE |");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} |", r.label);
            for sc in &r.scores {
                let _ = write!(s, " {} | {} | {} |", fixed3(sc.rmse), fixed3(sc.pbias), fixed3(sc.nse));
            }
            s.push('\n');
        }
        s
    }
}

/// `date,observed,predicted` rows.
pub fn prediction_csv(keys: &[MonthKey], observed: &[f64], predicted: &[f64]) -> String {
    let mut s = String::from("date,observed,predicted\n");
    for ((k, o), p) in keys.iter().zip(observed).zip(predicted) {
        let _ = writeln!(s, "{k},{o},{p}");
    }
    s
}
