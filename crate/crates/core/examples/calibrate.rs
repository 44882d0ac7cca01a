//! Recover known parameters from synthetic streamflow.
use abcd_piml::abcd::{AbcdParams, Forcing};
use abcd_piml::calib::{calibrate, CalibrationOptions};
use abcd_piml::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = AbcdParams::new(0.93, 5.0, 0.4, 1.5)?;
    for noise in [0.0, 0.05] {
        let series = generate(&SyntheticSpec { months: 360, q_noise: noise, ..SyntheticSpec::monsoon(truth, 42) })?;
        let pet = series.records().iter().map(|r| r.pet_mm.unwrap()).collect();
        let forcing = Forcing::from_series(&series, pet)?;

        let t = std::time::Instant::now();
        let r = calibrate(&forcing, &series.observed_q(), &CalibrationOptions::default())?;
        let [a, b, c, d] = r.params.to_array();
        println!(
            "noise {noise:.2}: a={a:.4} b={b:.3} c={c:.4} d={d:.4}  NSE {:.5}  {} evals  {:.0?}",
            r.train_nse,
            r.n_objective_evals,
            t.elapsed()
        );
    }
    Ok(())
}
