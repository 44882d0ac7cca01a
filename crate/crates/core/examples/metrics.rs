use abcd_piml::metrics::SkillScores;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let observed = [12.0, 40.0, 180.0, 260.0, 90.0, 30.0];
    let simulated = [10.0, 45.0, 160.0, 250.0, 100.0, 25.0];
    let s = SkillScores::compute(&observed, &simulated)?;
    println!("RMSE {:.3}  PBIAS {:.3}  NSE {:.3}", s.rmse, s.pbias, s.nse);

    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let flat = SkillScores::compute(&observed, &[mean; 6])?;
    println!("mean predictor NSE {:.3}", flat.nse);
    Ok(())
}
