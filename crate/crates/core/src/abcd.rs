//! The abcd monthly water-balance model.
//!
//! Available water `W = SM(t-1) + P` is split by the nonlinear
//! evapotranspiration opportunity `Y(W)` into what leaves as ET or stays in the
//! soil (`Y`) and what drains (`W - Y`). Drainage is partitioned by `c` into
//! direct runoff and groundwater recharge; the groundwater store is a linear
//! reservoir with outflow coefficient `d`, solved implicitly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::MonthKey;

/// Rounding noise tolerated in the discriminant of `Y(W)`, relative to `((W+b)/2a)²`,
/// before it is clamped to 0. Anything more negative is a logic error.
pub const DISCRIMINANT_CLAMP: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("a = {0} outside (0, 1]")]
    A(f64),
    #[error("b = {0} must be > 0")]
    B(f64),
    #[error("c = {0} outside [0, 1]")]
    C(f64),
    #[error("d = {0} must be > 0")]
    D(f64),
    #[error("state storages must be finite and non-negative (sm = {sm}, gw = {gw})")]
    State { sm: f64, gw: f64 },
}

/// The four behavioural parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct AbcdParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TryFrom<RawParams> for AbcdParams {
    type Error = ParamError;
    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        AbcdParams::new(r.a, r.b, r.c, r.d)
    }
}

impl AbcdParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ParamError> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(ParamError::A(a));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(ParamError::B(b));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(ParamError::C(c));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(ParamError::D(d));
        }
        Ok(Self { a, b, c, d })
    }

    /// Recharge/runoff tendency below saturation.
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Upper limit on `Y`, roughly the soil's saturation level (mm).
    pub fn b(&self) -> f64 {
        self.b
    }
    /// Fraction of drainage that recharges groundwater.
    pub fn c(&self) -> f64 {
        self.c
    }
    /// Groundwater outflow rate (1/month).
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self, ParamError> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Soil-moisture and groundwater storages (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcdState {
    pub sm: f64,
    pub gw: f64,
}

impl AbcdState {
    pub const ZERO: AbcdState = AbcdState { sm: 0.0, gw: 0.0 };

    pub fn new(sm: f64, gw: f64) -> Result<Self, ParamError> {
        if !(sm >= 0.0 && sm.is_finite() && gw >= 0.0 && gw.is_finite()) {
            return Err(ParamError::State { sm, gw });
        }
        Ok(Self { sm, gw })
    }
}

impl Default for AbcdState {
    /// Assumed storages when nothing better is known; always paired with a warm-up.
    fn default() -> Self {
        Self { sm: 100.0, gw: 50.0 }
    }
}

/// Fluxes of one month (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AbcdFluxes {
    /// Available water.
    pub w: f64,
    /// Evapotranspiration opportunity.
    pub y: f64,
    pub et: f64,
    /// Direct runoff.
    pub dr: f64,
    /// Groundwater recharge.
    pub gr: f64,
    /// Groundwater discharge.
    pub gd: f64,
    /// Total streamflow.
    pub q: f64,
}

/// `Y(W)`: the smaller root of `Y² - Y (W+b)/a + bW/a = 0`, computed as
/// `(bW/a) / (h + sqrt(h² - bW/a))` with `h = (W+b)/(2a)` to avoid cancellation.
fn et_opportunity(a: f64, b: f64, w: f64) -> f64 {
    let half = (w + b) / (2.0 * a);
    let product = b * w / a;
    let mut disc = half * half - product;
    if disc < 0.0 {
        // analytically (W - b)²/(4a²) + bW(1-a)/a² ≥ 0 for a ≤ 1
        assert!(
            disc >= DISCRIMINANT_CLAMP * half * half,
            "abcd discriminant {disc} far below zero (a = {a}, b = {b}, w = {w})"
        );
        disc = 0.0;
    }
    let denom = half + disc.sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (product / denom).clamp(0.0, w)
}

/// Advances one month. `p_mm` and `pet_mm` must be finite and non-negative.
pub fn step(params: &AbcdParams, prev: AbcdState, p_mm: f64, pet_mm: f64) -> (AbcdState, AbcdFluxes) {
    debug_assert!(p_mm >= 0.0 && pet_mm >= 0.0);
    let AbcdParams { a, b, c, d } = *params;

    let w = prev.sm + p_mm;
    let y = et_opportunity(a, b, w);
    let et = -y * (-pet_mm / b).exp_m1();
    let sm = y - et;
    let drainage = w - y;
    let gr = c * drainage;
    let dr = drainage - gr;
    let gw = (prev.gw + gr) / (1.0 + d);
    let gd = d * gw;
    let q = dr + gd;

    (AbcdState { sm, gw }, AbcdFluxes { w, y, et, dr, gr, gd, q })
}

/// One simulated month: the state at the end of the month and its fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub state: AbcdState,
    pub fluxes: AbcdFluxes,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForcingError {
    #[error("forcing is empty")]
    Empty,
    #[error("forcing columns have different lengths ({0} keys, {1} p, {2} pet)")]
    Length(usize, usize, usize),
    #[error("month {index}: {column} = {value} must be finite and non-negative")]
    Invalid { index: usize, column: &'static str, value: f64 },
}

/// Forcing only: dates, precipitation, temperature and PET. Carries no observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    keys: Vec<MonthKey>,
    p: Vec<f64>,
    t: Vec<f64>,
    pet: Vec<f64>,
}

impl Forcing {
    pub fn new(keys: Vec<MonthKey>, p: Vec<f64>, t: Vec<f64>, pet: Vec<f64>) -> Result<Self, ForcingError> {
        if keys.is_empty() {
            return Err(ForcingError::Empty);
        }
        if p.len() != keys.len() || pet.len() != keys.len() || t.len() != keys.len() {
            return Err(ForcingError::Length(keys.len(), p.len(), pet.len()));
        }
        for (column, values) in [("p", &p), ("pet", &pet)] {
            for (index, &value) in values.iter().enumerate() {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(ForcingError::Invalid { index, column, value });
                }
            }
        }
        if let Some((index, &value)) = t.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ForcingError::Invalid { index, column: "t", value });
        }
        Ok(Self { keys, p, t, pet })
    }

    /// Forcing from a series and its resolved PET.
    pub fn from_series(series: &crate::timeseries::MonthlySeries, pet: Vec<f64>) -> Result<Self, ForcingError> {
        Self::new(series.keys(), series.precipitation(), series.temperature(), pet)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[MonthKey] {
        &self.keys
    }
    pub fn p(&self) -> &[f64] {
        &self.p
    }
    pub fn t(&self) -> &[f64] {
        &self.t
    }
    pub fn pet(&self) -> &[f64] {
        &self.pet
    }

    /// Months `range` as a new forcing.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, ForcingError> {
        Self::new(
            self.keys[range.clone()].to_vec(),
            self.p[range.clone()].to_vec(),
            self.t[range.clone()].to_vec(),
            self.pet[range].to_vec(),
        )
    }
}

/// Runs `step` over every month of `forcing`.
pub fn simulate(params: &AbcdParams, init: AbcdState, forcing: &Forcing) -> Vec<SimStep> {
    let mut state = init;
    forcing
        .p()
        .iter()
        .zip(forcing.pet())
        .map(|(&p, &pet)| {
            let (next, fluxes) = step(params, state, p, pet);
            state = next;
            SimStep { state: next, fluxes }
        })
        .collect()
}

/// Trajectory as CSV with columns `date,w,y,et,sm,dr,gr,gw,gd,q`.
pub fn trajectory_csv(keys: &[MonthKey], trajectory: &[SimStep]) -> String {
    let mut out = String::from("date,w,y,et,sm,dr,gr,gw,gd,q\n");
    for (k, s) in keys.iter().zip(trajectory) {
        let f = &s.fluxes;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            k, f.w, f.y, f.et, s.state.sm, f.dr, f.gr, s.state.gw, f.gd, f.q
        ));
    }
    out
}
