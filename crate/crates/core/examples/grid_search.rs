//! Forward-chaining cross-validation over a ridge penalty grid.
use abcd_piml::regress::{chronological_folds, grid_search, DesignMatrix, ParamGrid, RegressorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..120).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1] + rng.gen_range(-0.5..0.5)).collect();
    let x = DesignMatrix::from_rows(&rows)?;

    for f in chronological_folds(x.rows(), 5)? {
        println!("train {:?}  validate {:?}", f.train, f.validation);
    }

    let grid = ParamGrid::new(vec![("lambda".into(), vec![1e-4, 1e-2, 1e-1, 1.0, 10.0])]);
    let result = grid_search(RegressorKind::Ridge, &grid, &x, &y, 5)?;
    for row in &result.table {
        println!("{:?} -> mean RMSE {:?}", row.point, row.mean_rmse);
    }
    println!("best: {:?}", result.best);
    Ok(())
}
