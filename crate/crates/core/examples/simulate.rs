//! Run the abcd model over the bundled forcing and print the first year.
use abcd_piml::abcd::{simulate, AbcdParams, AbcdState, Forcing};
use abcd_piml::timeseries::parse_forcing_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_catchment.csv"))?;
    let series = parse_forcing_csv(&text)?.series;
    let pet = series.records().iter().map(|r| r.pet_mm.unwrap_or(0.0)).collect();
    let forcing = Forcing::from_series(&series, pet)?;

    let params = AbcdParams::new(0.98, 400.0, 0.3, 0.1)?;
    let traj = simulate(&params, AbcdState::default(), &forcing);

    println!("month      P      ET      Q      SM      GW");
    for ((k, p), s) in forcing.keys().iter().zip(forcing.p()).zip(&traj).take(12) {
        println!("{k} {p:6.1} {:7.1} {:6.1} {:7.1} {:7.1}", s.fluxes.et, s.fluxes.q, s.state.sm, s.state.gw);
    }
    Ok(())
}
