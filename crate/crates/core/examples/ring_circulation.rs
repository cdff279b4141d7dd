//! Ring eigenstates: phase circulation in units of 2πħ and the winding
//! number read off the wave function, before and after evolution.

use std::f64::consts::PI;

use edlab::schrodinger::{madelung_compose, madelung_decompose, SchrodingerPropagator};
use edlab::winding::{circulation, winding_number, LoopPath};
use edlab::{Grid, ModelParams, PhaseRecord, ScalarField};

fn main() -> edlab::Result<()> {
    let grid = Grid::ring(256, 0.0, 2.0 * PI)?;
    let params = ModelParams::single(1.0, 1.0, 1e-3)?;
    let rho = ScalarField::constant(&grid, 1.0 / (2.0 * PI));
    let path = LoopPath::around_axis(&grid, 0, 0)?;
    let prop = SchrodingerPropagator::new(&grid, None, None, &params, params.dt)?;

    for m in [-2, -1, 1, 3] {
        let phase = PhaseRecord::with_windings(ScalarField::zeros(&grid), vec![m], 1.0)?;
        let mut psi = madelung_compose(&rho, &phase, &params)?;
        for _ in 0..500 {
            psi = prop.step(&psi)?;
        }
        let (_, evolved) = madelung_decompose(&psi, &params)?;
        println!(
            "m = {m:+}: circulation/2pi hbar = {:+.12} initial, {:+.12} evolved; winding number {}",
            circulation(&phase, &path, &params)? / (2.0 * PI),
            circulation(&evolved, &path, &params)? / (2.0 * PI),
            winding_number(&psi, &path)?.winding
        );
    }
    Ok(())
}
