//! Temperature-based potential evapotranspiration (Hamon).

use std::f64::consts::PI;

use thiserror::Error;

use crate::timeseries::{MonthKey, MonthlySeries};

/// Latitude limit in degrees. Beyond it the sunset hour angle is undefined for
/// part of the year.
pub const MAX_ABS_LATITUDE: f64 = 66.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PetError {
    #[error("latitude {0}° outside [-66, 66]")]
    LatitudeOutOfRange(f64),
    #[error("{key}: no pet_mm value and no latitude to compute one")]
    MissingPet { key: MonthKey },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PetInput {
    pub t_c: f64,
    pub latitude_deg: f64,
    pub key: MonthKey,
}

/// Solar declination (radians) for a day of year.
fn declination(day_of_year: u32, days_in_year: u32) -> f64 {
    0.409 * (2.0 * PI * f64::from(day_of_year) / f64::from(days_in_year) - 1.39).sin()
}

/// Mean day length in hours on day 15 of the month.
pub fn day_length_hours(latitude_deg: f64, key: MonthKey) -> Result<f64, PetError> {
    check_latitude(latitude_deg)?;
    let days_in_year = if key.is_leap_year() { 366 } else { 365 };
    let delta = declination(key.day_of_year(15), days_in_year);
    let phi = latitude_deg.to_radians();
    let omega = (-phi.tan() * delta.tan()).clamp(-1.0, 1.0).acos();
    Ok(24.0 * omega / PI)
}

fn check_latitude(latitude_deg: f64) -> Result<(), PetError> {
    if !(latitude_deg.abs() <= MAX_ABS_LATITUDE) {
        return Err(PetError::LatitudeOutOfRange(latitude_deg));
    }
    Ok(())
}

/// Saturation vapour pressure (kPa).
pub fn saturation_vapor_pressure_kpa(t_c: f64) -> f64 {
    0.611 * (17.27 * t_c / (t_c + 237.3)).exp()
}

/// Daily PET rate (mm/day) for the month. Zero at or below freezing.
pub fn hamon_pet_daily(input: PetInput) -> Result<f64, PetError> {
    let day_len = day_length_hours(input.latitude_deg, input.key)?;
    if input.t_c <= 0.0 {
        return Ok(0.0);
    }
    let e_sat = saturation_vapor_pressure_kpa(input.t_c);
    Ok(29.8 * day_len * e_sat / (input.t_c + 273.2))
}

/// Monthly PET (mm/month): the daily rate times the days in the month.
pub fn hamon_pet(input: PetInput) -> Result<f64, PetError> {
    Ok(hamon_pet_daily(input)? * f64::from(input.key.days_in_month()))
}

/// PET for every month: a `pet_mm` cell wins, otherwise Hamon at `latitude_deg`.
pub fn resolve_pet(series: &MonthlySeries, latitude_deg: Option<f64>) -> Result<Vec<f64>, PetError> {
    if let Some(lat) = latitude_deg {
        check_latitude(lat)?;
    }
    series
        .records()
        .iter()
        .map(|r| match (r.pet_mm, latitude_deg) {
            (Some(v), _) => Ok(v),
            (None, Some(lat)) => hamon_pet(PetInput { t_c: r.t_c, latitude_deg: lat, key: r.key }),
            (None, None) => Err(PetError::MissingPet { key: r.key }),
        })
        .collect()
}
