//! Ridge, LASSO and GPR on the same noisy 1-D curve.
use abcd_piml::regress::{DesignMatrix, HyperParams, ScaledRegressor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<[f64; 1]> = (0..60).map(|i| [i as f64 / 6.0]).collect();
    let y: Vec<f64> = xs.iter().map(|x| 20.0 + 8.0 * x[0].sin() + rng.gen_range(-1.0..1.0)).collect();
    let x = DesignMatrix::from_rows(&xs)?;
    let probe = DesignMatrix::from_rows(&[[1.5], [4.7], [8.0]])?;

    for hyper in [
        HyperParams::Ridge { lambda: 1e-3 },
        HyperParams::Lasso { lambda: 1e-3 },
        HyperParams::Gpr { sigma_f2: 1.0, length_scale: 0.1, sigma_n2: 0.01 },
    ] {
        let model = ScaledRegressor::fit(hyper, &x, &y)?;
        let p = model.predict(&probe)?;
        println!("{:<6} {:7.2} {:7.2} {:7.2}", hyper.kind().label(), p[0], p[1], p[2]);
    }
    println!("truth  {:7.2} {:7.2} {:7.2}", 20.0 + 8.0 * 1.5f64.sin(), 20.0 + 8.0 * 4.7f64.sin(), 20.0 + 8.0 * 8.0f64.sin());
    Ok(())
}
