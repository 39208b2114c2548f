//! How strongly the null-space projection of one bearing suppresses its
//! neighbours, per frequency.

use std::sync::Arc;

use subaoa::geometry::{AngleGrid, MicArray, DEFAULT_CIRCULAR_RADIUS};
use subaoa::subaoa::projection_attenuation;

fn main() -> subaoa::Result<()> {
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    let grid = Arc::new(AngleGrid::span(0.0, 180.0, 10.0)?);
    println!("theta  {}", grid.angles().iter().map(|a| format!("{a:>7.0}")).collect::<String>());
    for f in [500.0, 1000.0, 2000.0, 4000.0] {
        let curve = projection_attenuation(&array, f, 0.0, &grid)?;
        println!("{f:>5} {}", curve.iter().map(|db| format!("{db:>7.1}")).collect::<String>());
    }
    Ok(())
}
