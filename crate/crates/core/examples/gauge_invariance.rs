//! Twenty random smooth gauge transforms applied to a gauged ring: density
//! trajectories, current velocities and wave functions follow along.

use edlab::runner::gauge_check;
use edlab::scenario::{preset, validate};

fn main() -> edlab::Result<()> {
    let setup = validate(preset("gauge-invariance-demo")?).map_err(edlab::Error::Config)?;
    let report = gauge_check(&setup)?;
    println!("{} draws over {} steps", report.draws, setup.steps);
    println!("max |rho' - rho|            = {:.3e}", report.max_rho_linf);
    println!("max |v' - v|                = {:.3e}", report.max_velocity);
    if let Some(d) = report.max_psi_linf {
        println!("max |U psi' - e^(i chi) U psi| = {d:.3e}");
    }
    Ok(())
}
