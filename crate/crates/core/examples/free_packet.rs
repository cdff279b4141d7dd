//! Free Gaussian packet evolved by walkers, the coupled fields and the
//! Schrödinger reference, compared against each other and the spreading law.

use edlab::runner::run_scenario;
use edlab::scenario::{preset, validate};

fn main() -> edlab::Result<()> {
    let setup = validate(preset("free-packet")?).map_err(edlab::Error::Config)?;
    println!("{} steps of dt = {:.4e}, {} walkers", setup.steps, setup.params.dt, setup.scenario.walkers);
    let report = run_scenario(&setup, None)?;

    println!("{:>8} {:>8} {:>12} {:>12} {:>12}", "step", "t", "sigma exact", "sigma fields", "sigma psi");
    for s in &report.snapshots {
        let exact = (1.0 + (s.time / 2.0).powi(2)).sqrt();
        let w = |name| s.widths.iter().find(|w| format!("{:?}", w.0) == name).map(|w| w.1).unwrap_or(f64::NAN);
        println!("{:>8} {:>8.3} {:>12.6} {:>12.6} {:>12.6}", s.step, s.time, exact, w("Fields"), w("Schrodinger"));
    }
    print!("{}", report.summary());
    Ok(())
}
