use std::path::Path;
use std::process::{Command, Output};

use edlab::runner::{run_config, RunOptions};
use edlab::scenario::{apply_override, preset, validate_scenario, Severity, Solver, PRESETS};
use serde_json::{json, Value};

fn edlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edlab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn raw(name: &str) -> Value {
    serde_json::to_value(preset(name).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn issues(v: &Value) -> Vec<(Severity, String, String)> {
    match validate_scenario(v) {
        Ok(s) => s.warnings.iter().map(|w| (w.severity, w.path.clone(), w.message.clone())).collect(),
        Err(e) => e.into_iter().map(|w| (w.severity, w.path, w.message)).collect(),
    }
}

#[test]
fn presets_round_trip_through_json() {
    for name in PRESETS {
        let v = raw(name);
        assert!(validate_scenario(&v).is_ok(), "{name}");
    }
    assert!(preset("no-such-preset").is_err());
    assert!(preset("ring-eigenstate:x").is_err());
}

#[test]
fn validation_names_the_offending_field() {
    let mut v = raw("free-packet");
    apply_override(&mut v, "rho.scale=0.5").unwrap();
    let found = issues(&v);
    assert!(found.iter().any(|(s, p, m)| *s == Severity::Error && p.starts_with("rho") && m.contains("integrates to")), "{found:?}");

    let mut v = raw("free-packet");
    apply_override(&mut v, "walkers=10").unwrap();
    assert!(issues(&v).iter().any(|(_, p, _)| p == "walkers"));

    let mut v = raw("free-packet");
    apply_override(&mut v, "params.dt=0.5").unwrap();
    let found = issues(&v);
    assert!(found.iter().any(|(_, _, m)| m.contains("stability bound")), "{found:?}");

    let mut v = raw("free-packet");
    v["colour"] = json!("blue");
    assert!(validate_scenario(&v).is_err());

    let mut v = raw("gauged-ring-flux");
    apply_override(&mut v, "params.betas.0=0.5").unwrap();
    let found = issues(&v);
    assert!(found.iter().any(|(_, p, _)| p == "params.betas.0"), "{found:?}");
}

#[test]
fn overrides_edit_nested_values() {
    let mut v = raw("free-packet");
    apply_override(&mut v, "grid.points.0=128").unwrap();
    apply_override(&mut v, "solvers=[\"fields\"]").unwrap();
    assert_eq!(v["grid"]["points"][0], json!(128));
    assert_eq!(v["solvers"], json!(["fields"]));
    assert!(apply_override(&mut v, "no-equals-sign").is_err());
    assert!(apply_override(&mut v, "grid.points.9=1").is_err());
}

#[test]
fn reports_are_deterministic() {
    let opts = RunOptions {
        seed: Some(11),
        snapshot_every: None,
        solvers: Some(vec![Solver::Fields, Solver::Schrodinger]),
        out_dir: None,
    };
    let mut v = raw("ring-eigenstate:2");
    apply_override(&mut v, "horizon=0.2").unwrap();
    let a = run_config(&v, &opts).unwrap();
    let b = run_config(&v, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.series_csv(), b.series_csv());
    assert!(a.pass, "{}", a.summary());
    assert!(a.series_csv().starts_with("step,time,kinetic,potential,quantum,total"));
}

#[test]
fn cli_preset_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = edlab(&["preset", "ring-eigenstate:1", "--out", out.to_str().unwrap(), "--snapshots", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASS"));
    assert!(out.join("report.json").exists());
    assert!(out.join("series.csv").exists());
    assert!(std::fs::read_dir(out.join("snapshots")).unwrap().count() > 0);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // A failing check exits 1.
    let mut v = raw("ring-eigenstate:1");
    apply_override(&mut v, "checks.1.expected=0.7").unwrap();
    let failing = write_config(dir.path(), "fail.json", &v);
    assert_eq!(edlab(&["run", &failing]).status.code(), Some(1));

    // Invalid configuration exits 2.
    apply_override(&mut v, "params.masses.0=-1").unwrap();
    let invalid = write_config(dir.path(), "invalid.json", &v);
    assert_eq!(edlab(&["run", &invalid]).status.code(), Some(2));
    let o = edlab(&["validate", &invalid]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("params.masses"));

    assert_eq!(edlab(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    assert_eq!(edlab(&["preset", "bogus"]).status.code(), Some(2));
}

#[test]
fn cli_inspection_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let ring = write_config(dir.path(), "ring.json", &raw("ring-eigenstate:3"));
    let o = edlab(&["circulation", &ring, "--loop", "axis:0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["turns"].as_f64().unwrap() - 3.0).abs() < 1e-10);
    assert_eq!(v["winding"]["winding"], json!(3));
    assert_eq!(edlab(&["circulation", &ring, "--loop", "rect:0,0,1,1"]).status.code(), Some(2));

    let mut g = raw("gauge-invariance-demo");
    apply_override(&mut g, "gauge.chi.draws=3").unwrap();
    apply_override(&mut g, "horizon=0.05").unwrap();
    let demo = write_config(dir.path(), "gauge.json", &g);
    let o = edlab(&["gauge-check", &demo]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["draws"], json!(3));
    assert!(v["max_rho_linf"].as_f64().unwrap() < 1e-8);
    assert_eq!(edlab(&["gauge-check", &ring]).status.code(), Some(2));

    let printed = edlab(&["preset", "wallstrom-superposition:0.5", "--print"]);
    let v: Value = serde_json::from_str(&stdout(&printed)).unwrap();
    assert_eq!(v["name"], json!("wallstrom-superposition:0.5"));
    assert_eq!(edlab(&["preset", "wallstrom-superposition:0.5"]).status.code(), Some(0));
}

#[test]
fn cli_compares_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = edlab(&["preset", "ring-eigenstate:1", "--out", out.to_str().unwrap(), "--snapshots", "1000000"]);
    assert_eq!(o.status.code(), Some(0));
    let snaps = out.join("snapshots");
    let mut rho: Vec<_> = std::fs::read_dir(&snaps)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().unwrap().to_string_lossy().starts_with("rho_"))
        .collect();
    rho.sort();
    assert!(rho.len() >= 2, "{rho:?}");
    let o = edlab(&["compare", rho[0].to_str().unwrap(), rho[1].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}
