//! Scenario round trip: a preset written as JSON, overridden by dotted path,
//! validated, run with output, and two of its snapshots compared.

use edlab::io::{compare_snapshots, Snapshot};
use edlab::runner::{run_config, RunOptions};
use edlab::scenario::{apply_override, preset, validate_scenario};

fn main() -> edlab::Result<()> {
    let out = std::env::temp_dir().join("edlab-scenario-files");
    let mut raw = serde_json::to_value(preset("ring-eigenstate:2")?)?;
    apply_override(&mut raw, "horizon=0.25")?;
    apply_override(&mut raw, "snapshot_every=50")?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("scenario.json"), serde_json::to_string_pretty(&raw)?)?;

    let mut broken = raw.clone();
    apply_override(&mut broken, "params.dt=0.05")?;
    apply_override(&mut broken, "rho.scale=2")?;
    for issue in validate_scenario(&broken).unwrap_err() {
        println!("rejected: {issue}");
    }

    let options = RunOptions {
        out_dir: Some(out.clone()),
        ..Default::default()
    };
    let report = run_config(&raw, &options)?;
    print!("{}", report.summary());
    let last = report.steps;
    let fields = Snapshot::read(&out.join(format!("snapshots/rho_fields_{last:06}")))?;
    let psi = Snapshot::read(&out.join(format!("snapshots/psi_schrodinger_{last:06}")))?;
    let diff = compare_snapshots(&fields, &psi)?;
    println!("fields vs |psi|^2 at step {last}: L1 {:.3e}, Linf {:.3e}", diff.l1, diff.linf);
    println!("output in {}", out.display());
    Ok(())
}
