//! The abcd monthly water-balance model, its calibration against observed
//! streamflow, and a two-stage physics-informed regression cascade
//! (evapotranspiration, then streamflow) built on the model's simulated states.
//!
//! Runnable walkthroughs live in `examples/`; the `abcd-piml` binary wraps the
//! batch workflow.

pub mod abcd;
pub mod calib;
pub mod cli;
pub mod linalg;
pub mod metrics;
pub mod pet;
pub mod piml;
pub mod regress;
pub mod report;
pub mod synthetic;
pub mod timeseries;
