//! A noisy synthetic catchment in the ingestion CSV schema.
use abcd_piml::abcd::AbcdParams;
use abcd_piml::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec { months: 24, q_noise: 0.05, ..SyntheticSpec::monsoon(AbcdParams::new(0.98, 400.0, 0.3, 0.1)?, 7) };
    print!("{}", generate(&spec)?.to_csv());
    Ok(())
}
