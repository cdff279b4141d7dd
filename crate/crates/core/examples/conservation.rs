//! A thousand coupled RK4 steps on a ring with a potential, a winding and
//! a modulated density: the ensemble Hamiltonian and the norm stay put.

use std::f64::consts::PI;

use edlab::hamiltonian::{stability_bound, CoupledFields};
use edlab::{Grid, ModelParams, PhaseRecord, ScalarField};

fn main() -> edlab::Result<()> {
    let grid = Grid::ring(128, 0.0, 2.0 * PI)?;
    let rho = ScalarField::from_fn(&grid, |x| (1.0 + 0.5 * x[0].cos()) / (2.0 * PI))?;
    let base = ScalarField::from_fn(&grid, |x| 0.3 * (2.0 * x[0]).sin())?;
    let phase = PhaseRecord::with_windings(base, vec![1], 1.0)?;
    let potential = ScalarField::from_fn(&grid, |x| 0.5 * x[0].cos())?;
    let params = ModelParams::single(1.0, 1.0, 1.0)?;

    let dt = 0.5 * stability_bound(&grid, &params, 1.5);
    let mut fields = CoupledFields::new(rho, phase, None, Some(&potential), &params)?;
    let h0 = fields.hamiltonian();
    let (mut drift, mut norm) = (0.0f64, 0.0f64);
    for step in 1..=1000 {
        fields.step(dt)?;
        let h = fields.hamiltonian();
        drift = drift.max((h.total - h0.total).abs() / h0.total.abs());
        norm = norm.max((h.norm - h0.norm).abs());
        if step % 250 == 0 {
            println!("step {step:>4}  t = {:.4}  H = {:.15}  (K {:.6}, V {:+.6}, Q {:.6})",
                fields.time(), h.total, h.kinetic, h.potential, h.quantum);
        }
    }
    println!("max relative H drift {drift:.3e}, max norm drift {norm:.3e}");
    Ok(())
}
