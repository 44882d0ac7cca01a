//! Hamon PET through one year at two latitudes.
use abcd_piml::pet::{day_length_hours, hamon_pet, PetInput};
use abcd_piml::timeseries::MonthKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let temps = [18.0, 21.0, 26.0, 30.0, 32.0, 29.0, 27.0, 27.0, 27.0, 25.0, 21.0, 18.0];
    println!("month    T   N(21.5)  PET(21.5)  PET(-30)");
    for (m, &t_c) in temps.iter().enumerate() {
        let key = MonthKey::new(2001, m as u32 + 1)?;
        let n = day_length_hours(21.5, key)?;
        let north = hamon_pet(PetInput { t_c, latitude_deg: 21.5, key })?;
        let south = hamon_pet(PetInput { t_c, latitude_deg: -30.0, key })?;
        println!("{key} {t_c:4.1} {n:8.2} {north:10.1} {south:9.1}");
    }
    Ok(())
}
