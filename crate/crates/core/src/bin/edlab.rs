use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use edlab::io::{compare_snapshots, Snapshot};
use edlab::runner::{gauge_check, prepare, run_scenario, RunOptions};
use edlab::scenario::{apply_override, preset, validate_scenario, Severity, Solver};
use edlab::schrodinger::madelung_compose;
use edlab::winding::{circulation, winding_number, LoopSpec, QUANTIZATION_TOLERANCE};
use edlab::Error;

#[derive(Parser)]
#[command(name = "edlab", version, about = "Entropic dynamics numerical lab")]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and snapshots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Snapshot cadence in steps.
    #[arg(long, global = true)]
    snapshots: Option<u64>,
    /// Comma-separated solvers: walkers, fields, schrodinger.
    #[arg(long, global = true, value_delimiter = ',')]
    solvers: Option<Vec<Solver>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { config: PathBuf },
    /// Validate a scenario file without running it.
    Validate { config: PathBuf },
    /// Run a named preset, e.g. `ring-eigenstate:2`.
    Preset {
        name: String,
        /// Dotted-path override, e.g. `params.dt=0.001`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the preset's JSON instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Compare two snapshots (.json or .csv path, or the common stem).
    Compare { a: PathBuf, b: PathBuf },
    /// Check gauge invariance under the scenario's random transforms.
    GaugeCheck { config: PathBuf },
    /// Circulation of the initial phase around a loop.
    Circulation {
        config: PathBuf,
        /// `axis:A`, `axis:A@I,J` or `rect:I,J,W,H`.
        #[arg(long = "loop", value_name = "SPEC")]
        loop_spec: LoopSpec,
    },
}

fn read_config(path: &Path) -> Result<Value, Error> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    let options = RunOptions {
        seed: cli.seed,
        snapshot_every: cli.snapshots,
        solvers: cli.solvers.clone(),
        out_dir: cli.out.clone(),
    };
    let execute = |raw: Value| -> Result<bool, Error> {
        let setup = prepare(&raw, &options)?;
        for w in &setup.warnings {
            eprintln!("{w}");
        }
        let report = run_scenario(&setup, options.out_dir.as_deref())?;
        print!("{}", report.summary());
        println!("{}", if report.pass { "scenario passed" } else { "scenario FAILED" });
        Ok(report.pass)
    };
    match cli.command {
        Command::Run { config } => execute(read_config(&config)?),
        Command::Preset { name, overrides, print } => {
            let mut raw = serde_json::to_value(preset(&name)?)?;
            for o in &overrides {
                apply_override(&mut raw, o)?;
            }
            if print {
                print_json(&raw)?;
                return Ok(true);
            }
            execute(raw)
        }
        Command::Validate { config } => match validate_scenario(&read_config(&config)?) {
            Ok(setup) => {
                for w in &setup.warnings {
                    println!("{w}");
                }
                println!("valid: {} steps of dt = {:e}", setup.steps, setup.params.dt);
                Ok(true)
            }
            Err(issues) => {
                for i in &issues {
                    println!("{i}");
                }
                Ok(!issues.iter().any(|i| i.severity == Severity::Error))
            }
        },
        Command::Compare { a, b } => {
            let diff = compare_snapshots(&Snapshot::read(&a)?, &Snapshot::read(&b)?)?;
            print_json(&diff)?;
            Ok(true)
        }
        Command::GaugeCheck { config } => {
            let setup = prepare(&read_config(&config)?, &options)?;
            if setup.scenario.gauge.chi.is_none() {
                return Err(Error::Unsupported("the scenario configures no gauge draws (gauge.chi)".into()));
            }
            let report = gauge_check(&setup)?;
            print_json(&report)?;
            Ok(true)
        }
        Command::Circulation { config, loop_spec } => {
            let setup = prepare(&read_config(&config)?, &options)?;
            let path = loop_spec.build(&setup.grid)?;
            let turns = circulation(&setup.phase0, &path, &setup.params)? / (2.0 * std::f64::consts::PI);
            let winding = if setup.phase0.is_single_valued(QUANTIZATION_TOLERANCE) && setup.params.hbar() > 0.0 {
                let psi = madelung_compose(&setup.rho0, &setup.phase0, &setup.params)?;
                Some(winding_number(&psi, &path)?)
            } else {
                None
            };
            print_json(&json!({ "turns": turns, "winding": winding }))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
