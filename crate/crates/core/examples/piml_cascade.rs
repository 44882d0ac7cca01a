//! Train the two-stage cascade and the (P, T) baseline on the bundled
//! catchment, then score both on the test months.
use abcd_piml::abcd::Forcing;
use abcd_piml::calib::{calibrate, CalibrationOptions};
use abcd_piml::metrics::SkillScores;
use abcd_piml::piml::{predict_ml_baseline, predict_piml, train_ml_baseline, train_piml, PimlOptions};
use abcd_piml::regress::RegressorKind;
use abcd_piml::timeseries::{parse_forcing_csv, MonthKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_catchment.csv"))?;
    let series = parse_forcing_csv(&text)?.series;
    let pet = series.records().iter().map(|r| r.pet_mm.unwrap()).collect();
    let full = Forcing::from_series(&series, pet)?;
    let split = series.index_of(MonthKey::new(2009, 1)?).unwrap();
    let n = full.len();
    let train = full.slice(0..split)?;
    let (q, et) = (series.observed_q(), series.observed_et());
    let q_test: Vec<f64> = q[split..].iter().map(|v| v.unwrap()).collect();
    let et_test: Vec<f64> = et[split..].iter().map(|v| v.unwrap()).collect();

    let cal = calibrate(&train, &q[..split], &CalibrationOptions::default())?;
    println!("calibrated {:?}, training NSE {:.4}", cal.params.to_array(), cal.train_nse);

    let opts = PimlOptions::default();
    let kind = RegressorKind::Gpr;
    let model = train_piml(&train, &et[..split], &q[..split], kind, &cal, &opts)?;
    let pred = predict_piml(&model, &full)?.slice(split..n);
    let base = train_ml_baseline(&train, &q[..split], kind, cal.warmup_months, &opts)?;
    let base_pred = predict_ml_baseline(&base, &full)?.slice(split..n);

    println!("stage 1 {:?}", model.stage1.hyper);
    println!("stage 2 {:?}", model.stage2.hyper);
    println!("PIML ET  {:?}", SkillScores::compute(&et_test, &pred.et_hat)?);
    println!("PIML Q   {:?}", SkillScores::compute(&q_test, &pred.q_hat)?);
    println!("base Q   {:?}  ({} clipped)", SkillScores::compute(&q_test, &base_pred.q_hat)?, base_pred.clip_count);
    Ok(())
}
