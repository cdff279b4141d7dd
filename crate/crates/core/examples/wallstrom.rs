//! Superposing a ring state whose phase advances by a fraction of 2π per
//! turn with a constant state: the density fails to close around the loop.
//! Integer ratios close.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use edlab::winding::{loop_closure_mismatch, LoopPath, Superposition, WindingWave};
use edlab::Grid;
use num_complex::Complex64;

fn main() -> edlab::Result<()> {
    // Odd, so no grid point lands on θ = π.
    let grid = Grid::ring(63, 0.0, 2.0 * PI)?;
    let path = LoopPath::around_axis(&grid, 0, 0)?;
    let one = Complex64::new(1.0, 0.0);
    let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
    println!("{:>6} {:>14} {:>14} {:>14}", "ratio", "jump_rho", "1 - cos 2pi r", "jump_psi");
    for ratio in [0.25, 0.5, 1.0, 2.0] {
        let wave = Superposition::new()
            .with(c, WindingWave::on_grid(&grid, one, vec![ratio])?)
            .with(c, WindingWave::on_grid(&grid, one, vec![0.0])?);
        let jump = loop_closure_mismatch(&wave, &path)?;
        println!("{ratio:>6} {:>14.10} {:>14.10} {:>14.10}", jump.jump_rho, 1.0 - (2.0 * PI * ratio).cos(), jump.jump_psi);
    }
    Ok(())
}
