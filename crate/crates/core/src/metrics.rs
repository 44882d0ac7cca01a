//! Skill scores over paired observed/simulated series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("series lengths differ: {observed} observed vs {simulated} simulated")]
    LengthMismatch { observed: usize, simulated: usize },
    #[error("need at least 2 pairs, got {0}")]
    TooShort(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("NSE undefined: observed series is constant")]
    ConstantObserved,
    #[error("PBIAS undefined: observed total is zero")]
    ZeroObservedTotal,
}

/// Observed and simulated values of equal length `n >= 2`, all finite.
#[derive(Debug, Clone, Copy)]
pub struct PairedSeries<'a> {
    observed: &'a [f64],
    simulated: &'a [f64],
}

impl<'a> PairedSeries<'a> {
    pub fn new(observed: &'a [f64], simulated: &'a [f64]) -> Result<Self, MetricError> {
        if observed.len() != simulated.len() {
            return Err(MetricError::LengthMismatch {
                observed: observed.len(),
                simulated: simulated.len(),
            });
        }
        if observed.len() < 2 {
            return Err(MetricError::TooShort(observed.len()));
        }
        if let Some(i) = observed
            .iter()
            .zip(simulated)
            .position(|(o, s)| !o.is_finite() || !s.is_finite())
        {
            return Err(MetricError::NonFinite(i));
        }
        Ok(Self { observed, simulated })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn observed(&self) -> &'a [f64] {
        self.observed
    }

    pub fn simulated(&self) -> &'a [f64] {
        self.simulated
    }

    fn sse(&self) -> f64 {
        self.observed
            .iter()
            .zip(self.simulated)
            .map(|(o, s)| (s - o) * (s - o))
            .sum()
    }

    fn observed_mean(&self) -> f64 {
        self.observed.iter().sum::<f64>() / self.len() as f64
    }

    /// Σ(Oᵢ − Ō)².
    pub fn observed_variation(&self) -> f64 {
        let mean = self.observed_mean();
        self.observed.iter().map(|o| (o - mean) * (o - mean)).sum()
    }
}

/// Nash–Sutcliffe efficiency, `1 - Σ(S-O)² / Σ(O-Ō)²`.
pub fn nse(p: &PairedSeries) -> Result<f64, MetricError> {
    let denom = p.observed_variation();
    if denom == 0.0 {
        return Err(MetricError::ConstantObserved);
    }
    Ok(1.0 - p.sse() / denom)
}

/// Percent bias, `100 Σ(S-O) / ΣO`. Negative means under-prediction.
pub fn pbias(p: &PairedSeries) -> Result<f64, MetricError> {
    let total: f64 = p.observed.iter().sum();
    if total == 0.0 {
        return Err(MetricError::ZeroObservedTotal);
    }
    let diff: f64 = p.observed.iter().zip(p.simulated).map(|(o, s)| s - o).sum();
    Ok(100.0 * diff / total)
}

pub fn rmse(p: &PairedSeries) -> f64 {
    (p.sse() / p.len() as f64).sqrt()
}

/// The three scores reported together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillScores {
    pub rmse: f64,
    pub pbias: f64,
    pub nse: f64,
}

impl SkillScores {
    pub fn compute(observed: &[f64], simulated: &[f64]) -> Result<Self, MetricError> {
        let p = PairedSeries::new(observed, simulated)?;
        Ok(Self { rmse: rmse(&p), pbias: pbias(&p)?, nse: nse(&p)? })
    }
}
