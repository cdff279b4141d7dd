//! Scenario runner: evolves the requested solvers side by side, measures
//! their agreement and the scenario's checks, and writes a deterministic
//! report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::integrate_raw;
use crate::ensemble::{compare_densities, estimate_density, evolve_ensemble, init_ensemble, EnsembleState};
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::gauge::{gauge_transform, GaugeInput};
use crate::grid::Grid;
use crate::hamiltonian::{current_velocity, quantum_potential, CoupledFields, HamiltonianBreakdown};
use crate::io::{GridHeader, Snapshot};
use crate::kernel::multiplier_alpha;
use crate::params::ModelParams;
use crate::phase::PhaseRecord;
use crate::scenario::{validate, Check, ConfigIssue, DensitySpec, PhaseSpec, PotentialSpec, Scenario, Setup, Solver, SolverPair};
use crate::schrodinger::{madelung_compose, madelung_decompose, SchrodingerPropagator};
use crate::stats::ks_two_sample;
use crate::winding::{
    charge_from_multiplier, circulation, loop_closure_mismatch, multiplier_from_charge, quantization_check,
    ChargeReport, ClosureMismatch, LoopPath, MadelungWave, QuantizationVerdict, Superposition, QUANTIZATION_TOLERANCE,
};

/// Command-line style overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub solvers: Option<Vec<Solver>>,
    /// Where to write `report.json`, `series.csv` and snapshots.
    pub out_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(every) = self.snapshot_every {
            scenario.snapshot_every = every;
        }
        if let Some(solvers) = &self.solvers {
            scenario.solvers = solvers.clone();
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelEcho {
    /// `η dt / m` per axis.
    pub variance: Vec<f64>,
    /// `m / (η dt)` per particle.
    pub alpha: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairDistance {
    pub pair: SolverPair,
    pub l1: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotRow {
    pub step: u64,
    pub time: f64,
    pub distances: Vec<PairDistance>,
    /// Standard deviation along axis 0, per solver.
    pub widths: Vec<(Solver, f64)>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesRow {
    pub step: u64,
    pub time: f64,
    pub hamiltonian: Option<HamiltonianBreakdown>,
    pub norm_schrodinger: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GaugeReport {
    pub draws: usize,
    /// Largest `|ρ'(t) − ρ(t)|` over draws, steps and points.
    pub max_rho_linf: f64,
    /// Largest `|v' − v|` at the start and the horizon.
    pub max_velocity: f64,
    /// Largest `|U Ψ' − e^{iηβχ/ħ} U Ψ|`, when a wave function exists.
    pub max_psi_linf: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub max_floored_cells: usize,
    pub clamped_walkers: u64,
    /// L∞ change of the field density over the first step.
    pub first_step_linf: Option<f64>,
    /// Largest L∞ change of the field density over any single step.
    pub max_step_linf: Option<f64>,
    pub max_hamiltonian_drift: Option<f64>,
    pub max_norm_drift: Option<f64>,
    /// `ΔΦ/(2πħ)` around axis 0 at the start and horizon, per source.
    pub circulation: Vec<(String, f64)>,
    pub walker_ks_p_value: Option<f64>,
    pub linearity: Option<f64>,
    pub classical_residual: Option<f64>,
}

/// Everything a run measured. Contains no timestamp, so identical inputs
/// produce byte-identical reports.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub schema: u32,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    pub grid: GridHeader,
    pub params: ModelParams,
    pub steps: u64,
    pub horizon: f64,
    pub stability_bound: f64,
    pub walkers: usize,
    pub kernel: Option<KernelEcho>,
    pub warnings: Vec<ConfigIssue>,
    pub snapshots: Vec<SnapshotRow>,
    pub series: Vec<SeriesRow>,
    pub quantization: Vec<QuantizationVerdict>,
    pub charges: Vec<ChargeReport>,
    pub closure: Option<ClosureMismatch>,
    pub gauge: Option<GaugeReport>,
    pub diagnostics: Diagnostics,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn series_csv(&self) -> String {
        let mut out = String::from("step,time,kinetic,potential,quantum,total,norm_fields,norm_schrodinger\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for r in &self.series {
            let h = r.hamiltonian;
            let _ = writeln!(
                out,
                "{},{:.17e},{},{},{},{},{},{}",
                r.step,
                r.time,
                opt(h.map(|h| h.kinetic)),
                opt(h.map(|h| h.potential)),
                opt(h.map(|h| h.quantum)),
                opt(h.map(|h| h.total)),
                opt(h.map(|h| h.norm)),
                opt(r.norm_schrodinger),
            );
        }
        out
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<24} measured {:.3e} threshold {:.3e} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                c.detail
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), json + "\n")?;
        fs::write(dir.join("series.csv"), self.series_csv())?;
        Ok(())
    }
}

/// Parses, applies options, validates and runs.
pub fn run_config(raw: &serde_json::Value, options: &RunOptions) -> Result<ComparisonReport> {
    let setup = prepare(raw, options)?;
    run_scenario(&setup, options.out_dir.as_deref())
}

pub fn prepare(raw: &serde_json::Value, options: &RunOptions) -> Result<Setup> {
    let mut scenario: Scenario = serde_json::from_value(raw.clone()).map_err(|e| Error::Config(vec![ConfigIssue {
        severity: crate::scenario::Severity::Error,
        path: "$".into(),
        message: e.to_string(),
    }]))?;
    options.apply(&mut scenario);
    validate(scenario).map_err(Error::Config)
}

fn axis0_width(values: &[f64], grid: &Grid) -> f64 {
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (p, &r) in values.iter().enumerate() {
        let x = grid.coordinate(0, grid.index_along(p, 0));
        m0 += r;
        m1 += r * x;
        m2 += r * x * x;
    }
    let mean = m1 / m0;
    (m2 / m0 - mean * mean).max(0.0).sqrt()
}

fn sample_width(xs: &[f64]) -> f64 {
    crate::stats::mean_variance(xs).1.sqrt()
}

/// `σ(t)` of a free Gaussian packet, when the scenario is one.
fn analytic_width(setup: &Setup, t: f64) -> Option<f64> {
    let DensitySpec::Gaussian { width, .. } = &setup.scenario.rho else {
        return None;
    };
    if setup.scenario.potential != PotentialSpec::Zero
        || !matches!(setup.scenario.phase, PhaseSpec::Zero | PhaseSpec::Linear { .. })
    {
        return None;
    }
    let s0 = width[0];
    let spread = setup.params.hbar() * t / (2.0 * setup.params.mass_of_axis(&setup.grid, 0) * s0);
    Some((s0 * s0 + spread * spread).sqrt())
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Solvers {
    fields: Option<CoupledFields>,
    psi: Option<(SchrodingerPropagator, Vec<Complex64>)>,
    walkers: Option<EnsembleState>,
}

struct Recorder<'a> {
    setup: &'a Setup,
    out: Option<PathBuf>,
    snapshots: Vec<SnapshotRow>,
    series: Vec<SeriesRow>,
    diagnostics: Diagnostics,
    h0: Option<f64>,
    norm0: Option<f64>,
    psi_norm0: Option<f64>,
}

impl Recorder<'_> {
    fn track(&mut self, s: &Solvers) {
        if let Some(f) = &s.fields {
            let h = f.hamiltonian();
            let h0 = *self.h0.get_or_insert(h.total);
            let n0 = *self.norm0.get_or_insert(h.norm);
            let d = &mut self.diagnostics;
            let rel = if h0 != 0.0 { (h.total - h0).abs() / h0.abs() } else { (h.total - h0).abs() };
            d.max_hamiltonian_drift = Some(d.max_hamiltonian_drift.unwrap_or(0.0).max(rel));
            d.max_norm_drift = Some(d.max_norm_drift.unwrap_or(0.0).max((h.norm - n0).abs()));
        }
        if let Some((_, psi)) = &s.psi {
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.setup.grid.cell_volume();
            let n0 = *self.psi_norm0.get_or_insert(norm);
            let d = &mut self.diagnostics;
            d.max_norm_drift = Some(d.max_norm_drift.unwrap_or(0.0).max((norm - n0).abs()));
        }
    }

    fn snapshot(&mut self, s: &Solvers, step: u64, time: f64) -> Result<()> {
        let grid = &self.setup.grid;
        let mut densities: Vec<(Solver, ScalarField)> = Vec::new();
        let mut widths = Vec::new();
        let hamiltonian = s.fields.as_ref().map(|f| f.hamiltonian());
        if let Some(w) = &s.walkers {
            densities.push((Solver::Walkers, estimate_density(w, grid)?));
            widths.push((Solver::Walkers, sample_width(&w.axis_samples(0))));
        }
        if let Some(f) = &s.fields {
            if self.setup.uses(Solver::Fields) {
                densities.push((Solver::Fields, f.rho()));
                widths.push((Solver::Fields, axis0_width(f.rho_values(), grid)));
            }
        }
        let mut norm_schrodinger = None;
        let mut psi_field = None;
        if let Some((_, psi)) = &s.psi {
            let field = ComplexField::new(grid.clone(), psi.clone())?;
            let rho = field.density();
            norm_schrodinger = Some(integrate_raw(grid, rho.values()));
            widths.push((Solver::Schrodinger, axis0_width(rho.values(), grid)));
            densities.push((Solver::Schrodinger, rho));
            psi_field = Some(field);
        }
        let mut distances = Vec::new();
        for pair in SolverPair::ALL {
            let (a, b) = pair.solvers();
            let find = |s: Solver| densities.iter().find(|d| d.0 == s).map(|d| &d.1);
            if let (Some(ra), Some(rb)) = (find(a), find(b)) {
                let d = compare_densities(ra, rb)?;
                distances.push(PairDistance {
                    pair,
                    l1: d.l1,
                    linf: d.linf,
                });
            }
        }
        if let Some(dir) = &self.out {
            let dir = dir.join("snapshots");
            for (solver, rho) in &densities {
                let name = format!("rho_{}_{step:06}", solver_name(*solver));
                Snapshot::scalar(&name, rho, time, step).write(&dir)?;
            }
            if let Some(f) = &s.fields {
                if self.setup.uses(Solver::Fields) {
                    Snapshot::phase(&format!("phase_fields_{step:06}"), &f.phase(), time, step).write(&dir)?;
                }
            }
            if let Some(psi) = &psi_field {
                Snapshot::complex(&format!("psi_schrodinger_{step:06}"), psi, time, step).write(&dir)?;
            }
        }
        self.snapshots.push(SnapshotRow {
            step,
            time,
            distances,
            widths,
        });
        self.series.push(SeriesRow {
            step,
            time,
            hamiltonian,
            norm_schrodinger,
        });
        Ok(())
    }
}

fn solver_name(s: Solver) -> &'static str {
    match s {
        Solver::Walkers => "walkers",
        Solver::Fields => "fields",
        Solver::Schrodinger => "schrodinger",
    }
}

fn has_check(setup: &Setup, f: impl Fn(&Check) -> bool) -> bool {
    setup.scenario.checks.iter().any(f)
}

/// Runs a validated scenario and evaluates its checks. With `out` set,
/// writes `report.json`, `series.csv` and snapshots under it.
pub fn run_scenario(setup: &Setup, out: Option<&Path>) -> Result<ComparisonReport> {
    let grid = &setup.grid;
    let params = &setup.params;
    let dt = params.dt;
    let gauge = setup.gauge.as_ref();
    let potential = setup.potential.as_ref();

    let needs_fields = setup.uses(Solver::Fields) || setup.uses(Solver::Walkers);
    let mut solvers = Solvers {
        fields: if needs_fields {
            Some(CoupledFields::new(setup.rho0.clone(), setup.phase0.clone(), gauge, potential, params)?)
        } else {
            None
        },
        psi: if setup.uses(Solver::Schrodinger) {
            let prop = SchrodingerPropagator::new(grid, gauge, potential, params, dt)?;
            let psi = madelung_compose(&setup.rho0, &setup.phase0, params)?.into_values();
            Some((prop, psi))
        } else {
            None
        },
        walkers: if setup.uses(Solver::Walkers) {
            Some(init_ensemble(&setup.rho0, setup.scenario.walkers, setup.scenario.seed)?)
        } else {
            None
        },
    };
    let initial_samples = solvers.walkers.as_ref().map(|w| w.axis_samples(0));
    let track_steps = has_check(setup, |c| matches!(c, Check::Stationarity { .. }));

    let mut rec = Recorder {
        setup,
        out: out.map(Path::to_path_buf),
        snapshots: Vec::new(),
        series: Vec::new(),
        diagnostics: Diagnostics::default(),
        h0: None,
        norm0: None,
        psi_norm0: None,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    rec.track(&solvers);
    rec.snapshot(&solvers, 0, 0.0)?;

    let mut prev_rho = Vec::new();
    let mut max_step = 0.0f64;
    let mut first_step = None;
    let cadence = setup.scenario.snapshot_every;
    for k in 1..=setup.steps {
        if track_steps {
            if let Some(f) = &solvers.fields {
                prev_rho.clear();
                prev_rho.extend_from_slice(f.rho_values());
            }
        }
        match (&mut solvers.walkers, &mut solvers.fields) {
            (Some(w), Some(f)) => evolve_ensemble(w, f, params, 1)?,
            (None, Some(f)) => f.step(dt)?,
            _ => {}
        }
        if let Some((prop, psi)) = &mut solvers.psi {
            prop.step_in_place(psi)?;
        }
        if track_steps {
            if let Some(f) = &solvers.fields {
                let change = linf(&prev_rho, f.rho_values());
                first_step.get_or_insert(change);
                max_step = max_step.max(change);
            }
        }
        rec.track(&solvers);
        if k % cadence == 0 || k == setup.steps {
            rec.snapshot(&solvers, k, k as f64 * dt)?;
        }
    }
    if track_steps {
        rec.diagnostics.first_step_linf = first_step;
        rec.diagnostics.max_step_linf = Some(max_step);
    }
    if let Some(f) = &solvers.fields {
        rec.diagnostics.max_floored_cells = quantum_potential(&f.rho(), params).map(|q| q.floored_cells).unwrap_or(0);
    }
    if let Some(w) = &solvers.walkers {
        rec.diagnostics.clamped_walkers = w.clamped();
        if let Some(start) = &initial_samples {
            rec.diagnostics.walker_ks_p_value = Some(ks_two_sample(start, &w.axis_samples(0)).p_value);
        }
        if let Some(dir) = out {
            let mut buf = Vec::new();
            writeln!(buf_string(&mut buf), "{}", w.trajectory_header())?;
            w.write_trajectory_rows(&mut buf)?;
            fs::write(dir.join(format!("walkers_{:06}.csv", setup.steps)), buf)?;
        }
    }

    let quantization = if params.hbar() > 0.0 {
        quantization_check(params, QUANTIZATION_TOLERANCE)?
    } else {
        Vec::new()
    };
    let charges = (0..params.particles())
        .map(|n| charge_from_multiplier(params, n))
        .collect::<Result<Vec<_>>>()?;
    let closure = closure_of(setup)?;
    let gauge_report = if setup.scenario.gauge.chi.is_some() {
        Some(gauge_check(setup)?)
    } else {
        None
    };
    let final_fields_phase = solvers.fields.as_ref().map(|f| f.phase());
    let final_psi = match &solvers.psi {
        Some((_, psi)) => Some(ComplexField::new(grid.clone(), psi.clone())?),
        None => None,
    };
    if grid.periodic(0) && params.hbar() > 0.0 {
        let path = LoopPath::around_axis(grid, 0, 0)?;
        let turns = |p: &PhaseRecord| -> Result<f64> { Ok(circulation(p, &path, params)? / (2.0 * std::f64::consts::PI)) };
        let c = &mut rec.diagnostics.circulation;
        c.push(("initial".into(), turns(&setup.phase0)?));
        if let Some(p) = &final_fields_phase {
            c.push(("fields".into(), turns(p)?));
        }
        if let Some(psi) = &final_psi {
            if let Ok((_, p)) = madelung_decompose(psi, params) {
                c.push(("schrodinger".into(), turns(&p)?));
            }
        }
    }
    if has_check(setup, |c| matches!(c, Check::Linearity { .. })) && params.hbar() > 0.0 {
        rec.diagnostics.linearity = Some(linearity_defect(setup)?);
    }
    if params.hbar() == 0.0 {
        let mut residual = 0.0f64;
        let mut states = vec![(setup.rho0.clone(), setup.phase0.clone())];
        if let Some(f) = &solvers.fields {
            states.push((f.rho(), f.phase()));
        }
        for (rho, phase) in states {
            let q = quantum_potential(&rho, params)?;
            residual = residual.max(q.field.values().iter().fold(0.0, |m, v| m.max(v.abs())));
            let h = crate::hamiltonian::ensemble_hamiltonian(&rho, &phase, gauge, potential, params)?;
            residual = residual.max(h.quantum.abs()).max((h.total - h.kinetic - h.potential).abs());
        }
        rec.diagnostics.classical_residual = Some(residual);
    }

    let kernel = if dt > 0.0 {
        Some(KernelEcho {
            variance: (0..grid.dims()).map(|a| params.eta * dt / params.mass_of_axis(grid, a)).collect(),
            alpha: (0..params.particles())
                .map(|n| multiplier_alpha(params, n))
                .collect::<Result<Vec<_>>>()?,
        })
    } else {
        None
    };

    let mut report = ComparisonReport {
        scenario: setup.scenario.name.clone(),
        schema: setup.scenario.schema,
        seed: setup.scenario.seed,
        solvers: setup.scenario.solvers.clone(),
        grid: GridHeader::of(grid),
        params: params.clone(),
        steps: setup.steps,
        horizon: setup.scenario.horizon,
        stability_bound: setup.stability_bound,
        walkers: if setup.uses(Solver::Walkers) { setup.scenario.walkers } else { 0 },
        kernel,
        warnings: setup.warnings.clone(),
        snapshots: rec.snapshots,
        series: rec.series,
        quantization,
        charges,
        closure,
        gauge: gauge_report,
        diagnostics: rec.diagnostics,
        checks: Vec::new(),
        pass: false,
    };
    report.checks = setup.scenario.checks.iter().map(|c| evaluate(c, setup, &report)).collect();
    report.pass = report.checks.iter().all(|c| c.pass);
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

fn buf_string(buf: &mut Vec<u8>) -> &mut Vec<u8> {
    buf
}

use std::io::Write as _;

fn closure_of(setup: &Setup) -> Result<Option<ClosureMismatch>> {
    let Some(spec) = &setup.scenario.superposition else {
        return Ok(None);
    };
    let hbar = setup.params.hbar();
    if !(hbar > 0.0) || !setup.grid.periodic(0) {
        return Ok(None);
    }
    let partner = setup.partner_phase()?.expect("superposition configured");
    let [a, b] = spec.coefficients.map(|[re, im]| Complex64::new(re, im));
    // √ρ is single-valued; only the phase factors can fail to close.
    let unit = ScalarField::constant(&setup.grid, 1.0);
    let wave = Superposition::new()
        .with(
            a,
            MadelungWave {
                rho: unit.clone(),
                phase: setup.phase0.clone(),
                hbar,
            },
        )
        .with(
            b,
            MadelungWave {
                rho: unit,
                phase: partner,
                hbar,
            },
        );
    let path = LoopPath::around_axis(&setup.grid, 0, 0)?;
    loop_closure_mismatch(&wave, &path).map(Some)
}

/// `max |U(aΨ₁ + bΨ₂) − (aUΨ₁ + bUΨ₂)|` for two smooth test states.
pub fn linearity_defect(setup: &Setup) -> Result<f64> {
    let grid = &setup.grid;
    let prop = SchrodingerPropagator::new(grid, setup.gauge.as_ref(), setup.potential.as_ref(), &setup.params, setup.params.dt)?;
    let center: Vec<f64> = (0..grid.dims()).map(|a| grid.origin(a) + 0.5 * grid.extent(a)).collect();
    let bump = |x: &[f64], w: f64, k: f64| {
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for a in 0..x.len() {
            let d = (x[a] - center[a]) / (w * grid.extent(a));
            r2 += d * d;
            ph += k * 2.0 * std::f64::consts::PI * (x[a] - grid.origin(a)) / grid.extent(a);
        }
        Complex64::from_polar((-0.5 * r2).exp(), ph)
    };
    let psi1 = ComplexField::from_fn(grid, |x| bump(x, 0.15, 1.0))?;
    let psi2 = ComplexField::from_fn(grid, |x| bump(x, 0.08, -2.0) * (1.0 + 0.3 * x[0].cos()))?;
    let (a, b) = (Complex64::new(0.6, 0.8), Complex64::new(-0.3, 0.5));
    let mixed = crate::winding::superpose(&psi1, &psi2, a, b)?;
    let lhs = prop.step(&mixed)?;
    let rhs = crate::winding::superpose(&prop.step(&psi1)?, &prop.step(&psi2)?, a, b)?;
    lhs.max_abs_diff(&rhs)
}

/// Runs the scenario's random gauge draws against the untransformed
/// fields over the horizon.
pub fn gauge_check(setup: &Setup) -> Result<GaugeReport> {
    let grid = &setup.grid;
    let params = &setup.params;
    let dt = params.dt;
    let base_gauge = setup.gauge.clone().unwrap_or_else(|| GaugeInput::none(grid));
    let potential = setup.potential.as_ref();
    let draws = setup.chi_draws()?;
    let single_valued = params.hbar() > 0.0 && setup.phase0.is_single_valued(QUANTIZATION_TOLERANCE);

    let mut reference = CoupledFields::new(setup.rho0.clone(), setup.phase0.clone(), Some(&base_gauge), potential, params)?;
    let mut history = vec![reference.rho_values().to_vec()];
    for _ in 0..setup.steps {
        reference.step(dt)?;
        history.push(reference.rho_values().to_vec());
    }
    let v0 = current_velocity(&setup.rho0, &setup.phase0, Some(&base_gauge), params)?;
    let v_end = current_velocity(&reference.rho(), &reference.phase(), Some(&base_gauge), params)?;

    let (psi0, psi_end) = if single_valued {
        let prop = SchrodingerPropagator::new(grid, Some(&base_gauge), potential, params, dt)?;
        let mut psi = madelung_compose(&setup.rho0, &setup.phase0, params)?;
        let start = psi.clone();
        for _ in 0..setup.steps {
            psi = prop.step(&psi)?;
        }
        (Some(start), Some(psi))
    } else {
        (None, None)
    };

    let mut report = GaugeReport {
        draws: draws.len(),
        max_psi_linf: psi0.as_ref().map(|_| 0.0),
        ..Default::default()
    };
    for chi in &draws {
        let t = gauge_transform(&base_gauge, chi, Some(&setup.phase0), psi0.as_ref(), params)?;
        let phase = t.phase.expect("phase was given");
        let mut fields = CoupledFields::new(setup.rho0.clone(), phase.clone(), Some(&t.gauge), potential, params)?;
        let v = current_velocity(&setup.rho0, &phase, Some(&t.gauge), params)?;
        report.max_velocity = report.max_velocity.max(linf(v.values(), v0.values()));
        report.max_rho_linf = report.max_rho_linf.max(linf(fields.rho_values(), &history[0]));
        for rho in &history[1..] {
            fields.step(dt)?;
            report.max_rho_linf = report.max_rho_linf.max(linf(fields.rho_values(), rho));
        }
        let v = current_velocity(&fields.rho(), &fields.phase(), Some(&t.gauge), params)?;
        report.max_velocity = report.max_velocity.max(linf(v.values(), v_end.values()));

        if let (Some(psi_t), Some(psi_end)) = (t.psi, &psi_end) {
            let prop = SchrodingerPropagator::new(grid, Some(&t.gauge), potential, params, dt)?;
            let mut psi = psi_t;
            for _ in 0..setup.steps {
                psi = prop.step(&psi)?;
            }
            // Transform the reference at the horizon with the same χ.
            let expected = gauge_transform(&base_gauge, chi, None, Some(psi_end), params)?
                .psi
                .expect("psi was given");
            let d = psi.max_abs_diff(&expected)?;
            report.max_psi_linf = Some(report.max_psi_linf.unwrap_or(0.0).max(d));
        }
    }
    Ok(report)
}

fn result(name: String, measured: f64, threshold: f64, pass: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        measured,
        threshold,
        pass: pass && measured.is_finite(),
        detail: detail.into(),
    }
}

fn missing(name: String, what: &str) -> CheckResult {
    result(name, f64::NAN, f64::NAN, false, format!("not measured: {what}"))
}

fn evaluate(check: &Check, setup: &Setup, r: &ComparisonReport) -> CheckResult {
    let name = check.name();
    let d = &r.diagnostics;
    let last = r.snapshots.last();
    match check {
        Check::DensityL1 { pair, max } => match last.and_then(|s| s.distances.iter().find(|d| d.pair == *pair)) {
            Some(dist) => result(name, dist.l1, *max, dist.l1 <= *max, format!("at t = {:.6}", last.unwrap().time)),
            None => missing(name, "both solvers must run"),
        },
        Check::PacketWidth { max_relative } => {
            let mut worst = f64::NAN;
            for s in &r.snapshots {
                let Some(exact) = analytic_width(setup, s.time) else {
                    return missing(name, "initial state is not a free Gaussian packet");
                };
                for (_, w) in &s.widths {
                    let rel = (w - exact).abs() / exact;
                    if !(worst >= rel) {
                        worst = rel;
                    }
                }
            }
            result(name, worst, *max_relative, worst <= *max_relative, "max over snapshots and solvers")
        }
        Check::HamiltonianDrift { max_relative } => match d.max_hamiltonian_drift {
            Some(v) => result(name, v, *max_relative, v <= *max_relative, ""),
            None => missing(name, "field solver did not run"),
        },
        Check::NormDrift { max } => match d.max_norm_drift {
            Some(v) => result(name, v, *max, v <= *max, ""),
            None => missing(name, "no solver tracks a norm"),
        },
        Check::HamiltonianValue { expected, max_relative } => {
            let h = crate::hamiltonian::ensemble_hamiltonian(
                &setup.rho0,
                &setup.phase0,
                setup.gauge.as_ref(),
                setup.potential.as_ref(),
                &setup.params,
            );
            match h {
                Ok(h) => {
                    let rel = (h.total - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
                    result(name, rel, *max_relative, rel <= *max_relative, format!("H = {:.12}", h.total))
                }
                Err(e) => missing(name, &e.to_string()),
            }
        }
        Check::Stationarity { max_step_linf } => match d.first_step_linf {
            Some(v) => result(
                name,
                v,
                *max_step_linf,
                v <= *max_step_linf,
                format!("first step from the initial state; largest step {:.3e}", d.max_step_linf.unwrap_or(f64::NAN)),
            ),
            None => missing(name, "field solver did not run"),
        },
        Check::WalkerStationarity { significance } => match d.walker_ks_p_value {
            Some(p) => result(name, p, *significance, p >= *significance, "two-sample KS p-value, start against horizon"),
            None => missing(name, "walkers did not run"),
        },
        Check::Quantization { expect_pass } => {
            if r.quantization.is_empty() {
                return missing(name, "quantization needs hbar > 0");
            }
            let worst = r.quantization.iter().fold(0.0f64, |m, q| m.max(q.deviation));
            let ok = r.quantization.iter().all(|q| q.pass == *expect_pass);
            result(
                name,
                worst,
                QUANTIZATION_TOLERANCE,
                ok,
                format!("expected {}", if *expect_pass { "integer ratios" } else { "a non-integer ratio" }),
            )
        }
        Check::ClosureJump { expected, tolerance } => match &r.closure {
            Some(c) => {
                let err = (c.jump_rho - expected).abs();
                result(name, err, *tolerance, err <= *tolerance, format!("jump in |psi|^2 = {:.12}", c.jump_rho))
            }
            None => missing(name, "needs a superposition, hbar > 0 and a periodic axis 0"),
        },
        Check::GaugeInvariance { max_rho_linf, max_velocity } => match &r.gauge {
            Some(g) if g.draws > 0 => {
                let psi = g.max_psi_linf.unwrap_or(0.0);
                let ok = g.max_rho_linf <= *max_rho_linf && psi <= *max_rho_linf && g.max_velocity <= *max_velocity;
                result(
                    name,
                    g.max_rho_linf.max(psi),
                    *max_rho_linf,
                    ok,
                    format!("{} draws, velocity {:.3e} (max {:.1e})", g.draws, g.max_velocity, max_velocity),
                )
            }
            _ => missing(name, "no gauge draws configured"),
        },
        Check::Circulation { expected_turns, tolerance } => {
            if d.circulation.is_empty() {
                return missing(name, "needs hbar > 0 and a periodic axis 0");
            }
            let err = d.circulation.iter().fold(0.0f64, |m, (_, t)| m.max((t - expected_turns).abs()));
            let sources: Vec<&str> = d.circulation.iter().map(|c| c.0.as_str()).collect();
            result(name, err, *tolerance, err <= *tolerance, sources.join(", "))
        }
        Check::Linearity { max } => match d.linearity {
            Some(v) => result(name, v, *max, v <= *max, ""),
            None => missing(name, "needs hbar > 0"),
        },
        Check::Charge { tolerance } => {
            let p = &setup.params;
            let mut err = 0.0f64;
            for c in &r.charges {
                let beta = p.beta(c.particle);
                err = err.max((c.charge - p.c * p.eta * beta).abs());
                err = err.max((multiplier_from_charge(p, c.charge) - beta).abs());
                if let Some(mu) = c.mu {
                    err = err.max((c.charge - mu as f64 * c.basic_charge).abs());
                }
            }
            result(name, err, *tolerance, err <= *tolerance, "q = c eta beta, and q = mu hbar c when quantized")
        }
        Check::ClassicalLimit => match d.classical_residual {
            Some(v) => result(name, v, 0.0, v == 0.0, "quantum potential and quantum energy"),
            None => missing(name, "needs hbar = 0"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    fn setup(name: &str) -> Setup {
        validate(preset(name).unwrap()).unwrap()
    }

    #[test]
    fn ring_eigenstate_passes() {
        let r = run_scenario(&setup("ring-eigenstate:2"), None).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn wallstrom_checks() {
        for name in ["wallstrom-superposition:0.5", "wallstrom-superposition:1"] {
            let r = run_scenario(&setup(name), None).unwrap();
            assert!(r.pass, "{name}\n{}", r.summary());
        }
    }

    #[test]
    fn gauged_flux_passes() {
        let r = run_scenario(&setup("gauged-ring-flux"), None).unwrap();
        assert!(r.pass, "{}", r.summary());
    }
}
