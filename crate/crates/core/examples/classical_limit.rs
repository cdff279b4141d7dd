//! With ξ = 0 the quantum potential vanishes identically and the ensemble
//! Hamiltonian is kinetic plus potential energy; walkers still agree with
//! the continuity equation.

use edlab::runner::run_scenario;
use edlab::scenario::{preset, validate};

fn main() -> edlab::Result<()> {
    let setup = validate(preset("classical-limit")?).map_err(edlab::Error::Config)?;
    println!("hbar = {}, {} steps of dt = {:.4e}", setup.params.hbar(), setup.steps, setup.params.dt);
    let report = run_scenario(&setup, None)?;
    for row in report.series.iter().step_by(2) {
        if let Some(h) = row.hamiltonian {
            println!("t = {:.3}  K = {:.10}  V = {}  Q = {}  H = {:.10}", row.time, h.kinetic, h.potential, h.quantum, h.total);
        }
    }
    print!("{}", report.summary());
    Ok(())
}
