//! Scenario configuration: a versioned JSON schema with closed-form field
//! initializers, structural and physical validation, and named presets.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calculus::integrate_raw;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::gauge::{AngleField, GaugeInput};
use crate::grid::{Grid, ParticleLayout, Topology};
use crate::hamiltonian::{stability_bound, SAFETY_FACTOR};
use crate::params::ModelParams;
use crate::phase::PhaseRecord;
use crate::winding::QUANTIZATION_TOLERANCE;

pub const SCHEMA_VERSION: u32 = 1;

/// `∫ρ₀` must equal one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Open boundaries should see `ρ ≤ BOUNDARY_WARNING · max ρ`.
pub const BOUNDARY_WARNING: f64 = 1e-8;

/// Statistical checks on walkers need at least this many.
pub const MIN_WALKERS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding, addressed by a dotted path into the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    fn error(path: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    fn warning(path: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag} at {}: {}", self.path, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Walkers,
    Fields,
    Schrodinger,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "walkers" => Ok(Solver::Walkers),
            "fields" => Ok(Solver::Fields),
            "schrodinger" => Ok(Solver::Schrodinger),
            other => Err(Error::InvalidParams(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPair {
    WalkersFields,
    FieldsSchrodinger,
    WalkersSchrodinger,
}

impl SolverPair {
    pub const ALL: [SolverPair; 3] = [
        SolverPair::WalkersFields,
        SolverPair::FieldsSchrodinger,
        SolverPair::WalkersSchrodinger,
    ];

    pub fn solvers(self) -> (Solver, Solver) {
        match self {
            SolverPair::WalkersFields => (Solver::Walkers, Solver::Fields),
            SolverPair::FieldsSchrodinger => (Solver::Fields, Solver::Schrodinger),
            SolverPair::WalkersSchrodinger => (Solver::Walkers, Solver::Schrodinger),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SolverPair::WalkersFields => "walkers-fields",
            SolverPair::FieldsSchrodinger => "fields-schrodinger",
            SolverPair::WalkersSchrodinger => "walkers-schrodinger",
        }
    }
}

/// Grid axes run from `lo` to `hi`; on periodic axes `hi − lo` is the period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub topology: Topology,
    pub points: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub layout: ParticleLayout,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let dims = self.topology.dims();
        if self.points.len() != dims || self.lo.len() != dims || self.hi.len() != dims {
            return Err(Error::InvalidGrid(format!("{:?} needs {dims} entries per axis list", self.topology)));
        }
        let spacing = (0..dims)
            .map(|a| {
                let span = self.hi[a] - self.lo[a];
                let cells = if self.topology.periodic() { self.points[a] } else { self.points[a].saturating_sub(1).max(1) };
                span / cells as f64
            })
            .collect();
        Grid::new(self.topology, self.points.clone(), self.lo.clone(), spacing, self.layout)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub eta: f64,
    /// Give either `xi` or `hbar`; `ħ = √(8ξ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    pub masses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub c: f64,
    /// Omitted: `SAFETY_FACTOR` times the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    /// Product of normalized normal densities.
    Gaussian {
        center: Vec<f64>,
        width: Vec<f64>,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    /// `(1 + a cos(2π k (x − lo)/L))`, normalized, along a periodic axis.
    Cosine {
        amplitude: f64,
        turns: i64,
        axis: usize,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    /// `|ψ₀|²` of the oscillator `½ m ω² (x − center)²`.
    HarmonicGround {
        omega: Vec<f64>,
        center: Vec<f64>,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhaseSpec {
    #[default]
    Zero,
    /// `Φ = p · x`.
    Linear { momentum: Vec<f64> },
    /// Integer windings of `2πħ` per turn around periodic axes.
    PlaneWaveWinding { windings: Vec<i64> },
    /// `a sin(2π k (x − lo)/L)` along one axis plus plane-wave windings.
    Sinusoid {
        amplitude: f64,
        turns: i64,
        axis: usize,
        #[serde(default)]
        windings: Vec<i64>,
    },
    /// The phase `η β_n φ_n` inherited from the windings of the angle
    /// fields, carrying `2π η β_n` per turn.
    AngleWinding,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `Σ_a ½ m_a ω_a² (x_a − center_a)²`.
    HarmonicPotential { omega: Vec<f64>, center: Vec<f64> },
    /// `a cos(2π k (x − lo)/L)` along one axis.
    Cosine { amplitude: f64, turns: i64, axis: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConnectionSpec {
    #[default]
    Zero,
    ConstantA { value: Vec<f64> },
}

/// Random smooth gauge functions: `draws` independent χ, each a sum of
/// `modes` sinusoids per axis with amplitudes up to `amplitude`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSpec {
    pub draws: usize,
    pub modes: usize,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    /// Winding of each particle's angle field; empty means none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angle_windings: Vec<Vec<i64>>,
    #[serde(default)]
    pub connection: ConnectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<ChiSpec>,
}

/// A second state sharing `ρ₀` with the initial one, superposed with it
/// for loop-closure tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionSpec {
    pub partner: PhaseSpec,
    /// `[[re, im], [re, im]]` for the initial state and the partner.
    pub coefficients: [[f64; 2]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// L1 distance between two solvers' densities at the horizon.
    DensityL1 { pair: SolverPair, max: f64 },
    /// Standard deviation against the free spreading law, all solvers.
    PacketWidth { max_relative: f64 },
    /// `max_t |H(t) − H(0)| / |H(0)|` of the field solver.
    HamiltonianDrift { max_relative: f64 },
    /// `max_t |∫ρ(t) − ∫ρ(0)|` for fields and `∫|Ψ|²` for Schrödinger.
    NormDrift { max: f64 },
    /// `H` of the initial fields.
    HamiltonianValue { expected: f64, max_relative: f64 },
    /// L∞ change of the field density over the first step.
    Stationarity { max_step_linf: f64 },
    /// Two-sample KS test of walker positions at start and horizon.
    WalkerStationarity { significance: f64 },
    /// Every particle's quantization verdict equals `expect_pass`.
    Quantization { expect_pass: bool },
    /// Loop-closure jump around axis 0 of the configured superposition of
    /// unit-amplitude phase factors `e^{iΦ/ħ}`.
    ClosureJump { expected: f64, tolerance: f64 },
    /// Random gauge transforms leave `ρ(t)` and `v` unchanged.
    GaugeInvariance { max_rho_linf: f64, max_velocity: f64 },
    /// `ΔΦ/(2πħ)` around axis 0 at start and horizon.
    Circulation { expected_turns: f64, tolerance: f64 },
    /// Schrödinger step of a superposition against the superposed steps.
    Linearity { max: f64 },
    /// Charge reports reproduce `q = cηβ` and `q = μħc`.
    Charge { tolerance: f64 },
    /// Zero quantum potential and `H = kinetic + potential`.
    ClassicalLimit,
}

impl Check {
    pub fn name(&self) -> String {
        match self {
            Check::DensityL1 { pair, .. } => format!("density-l1/{}", pair.label()),
            Check::PacketWidth { .. } => "packet-width".into(),
            Check::HamiltonianDrift { .. } => "hamiltonian-drift".into(),
            Check::NormDrift { .. } => "norm-drift".into(),
            Check::HamiltonianValue { .. } => "hamiltonian-value".into(),
            Check::Stationarity { .. } => "stationarity".into(),
            Check::WalkerStationarity { .. } => "walker-stationarity".into(),
            Check::Quantization { .. } => "quantization".into(),
            Check::ClosureJump { .. } => "closure-jump".into(),
            Check::GaugeInvariance { .. } => "gauge-invariance".into(),
            Check::Circulation { .. } => "circulation".into(),
            Check::Linearity { .. } => "linearity".into(),
            Check::Charge { .. } => "charge".into(),
            Check::ClassicalLimit => "classical-limit".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub grid: GridSpec,
    pub params: ParamSpec,
    pub rho: DensitySpec,
    #[serde(default)]
    pub phase: PhaseSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub gauge: GaugeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<SuperpositionSpec>,
    pub horizon: f64,
    #[serde(default = "default_cadence")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub walkers: usize,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

fn default_cadence() -> u64 {
    100
}

/// A validated scenario with its fields built.
#[derive(Clone, Debug)]
pub struct Setup {
    pub scenario: Scenario,
    pub grid: Grid,
    /// `dt` is the step actually used: the horizon divided into whole steps.
    pub params: ModelParams,
    pub rho0: ScalarField,
    pub phase0: PhaseRecord,
    pub potential: Option<ScalarField>,
    pub gauge: Option<GaugeInput>,
    pub steps: u64,
    pub stability_bound: f64,
    pub warnings: Vec<ConfigIssue>,
}

impl Setup {
    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn uses(&self, solver: Solver) -> bool {
        self.scenario.solvers.contains(&solver)
    }

    pub fn partner_phase(&self) -> Result<Option<PhaseRecord>> {
        match &self.scenario.superposition {
            Some(s) => Ok(Some(build_phase(&s.partner, &self.grid, &self.params, self.gauge.as_ref())?)),
            None => Ok(None),
        }
    }

    /// The scenario's random gauge functions, one list per draw.
    pub fn chi_draws(&self) -> Result<Vec<Vec<ScalarField>>> {
        match &self.scenario.gauge.chi {
            Some(spec) => random_chi(&self.grid, spec, self.scenario.seed),
            None => Ok(Vec::new()),
        }
    }
}

fn axis_check(grid: &Grid, axis: usize, periodic: bool) -> Result<()> {
    if axis >= grid.dims() {
        return Err(Error::InvalidParams(format!("axis {axis} does not exist")));
    }
    if periodic && !grid.periodic(axis) {
        return Err(Error::InvalidParams(format!("axis {axis} must be periodic")));
    }
    Ok(())
}

fn per_axis<'a>(v: &'a [f64], grid: &Grid, what: &'static str) -> Result<&'a [f64]> {
    if v.len() != grid.dims() {
        return Err(Error::LengthMismatch {
            what,
            expected: grid.dims(),
            got: v.len(),
        });
    }
    Ok(v)
}

fn unit_phase(grid: &Grid, axis: usize, turns: i64, x: &[f64]) -> f64 {
    2.0 * PI * turns as f64 * (x[axis] - grid.origin(axis)) / grid.extent(axis)
}

pub fn build_density(spec: &DensitySpec, grid: &Grid, params: &ModelParams) -> Result<ScalarField> {
    let discrete_volume = grid.len() as f64 * grid.cell_volume();
    let gaussian = |center: &[f64], width: &[f64], scale: f64| -> Result<ScalarField> {
        per_axis(center, grid, "center")?;
        per_axis(width, grid, "width")?;
        if width.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParams("gaussian widths must be positive".into()));
        }
        ScalarField::from_fn(grid, |x| {
            scale
                * (0..x.len())
                    .map(|a| {
                        let z = (x[a] - center[a]) / width[a];
                        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * width[a])
                    })
                    .product::<f64>()
        })
    };
    match spec {
        DensitySpec::Uniform { scale } => Ok(ScalarField::constant(grid, scale / discrete_volume)),
        DensitySpec::Gaussian { center, width, scale } => gaussian(center, width, *scale),
        DensitySpec::Cosine {
            amplitude,
            turns,
            axis,
            scale,
        } => {
            axis_check(grid, *axis, true)?;
            if amplitude.abs() >= 1.0 {
                return Err(Error::InvalidParams("cosine density needs |amplitude| < 1".into()));
            }
            ScalarField::from_fn(grid, |x| scale * (1.0 + amplitude * unit_phase(grid, *axis, *turns, x).cos()) / discrete_volume)
        }
        DensitySpec::HarmonicGround { omega, center, scale } => {
            per_axis(omega, grid, "omega")?;
            let hbar = params.hbar();
            if !(hbar > 0.0) {
                return Err(Error::InvalidParams("an oscillator ground state needs hbar > 0".into()));
            }
            let width: Vec<f64> = (0..grid.dims())
                .map(|a| (hbar / (2.0 * params.mass_of_axis(grid, a) * omega[a])).sqrt())
                .collect();
            gaussian(center, &width, *scale)
        }
    }
}

pub fn build_phase(spec: &PhaseSpec, grid: &Grid, params: &ModelParams, gauge: Option<&GaugeInput>) -> Result<PhaseRecord> {
    let hbar = params.hbar();
    let dims = grid.dims();
    match spec {
        PhaseSpec::Zero => Ok(PhaseRecord::zero(grid, hbar)),
        PhaseSpec::Linear { momentum } => {
            per_axis(momentum, grid, "momentum")?;
            if (0..dims).any(|a| grid.periodic(a) && momentum[a] != 0.0) {
                return Err(Error::InvalidParams(
                    "linear phases live on open axes; use plane-wave-winding on periodic ones".into(),
                ));
            }
            let base = ScalarField::from_fn(grid, |x| x.iter().zip(momentum).map(|(xi, p)| xi * p).sum())?;
            Ok(PhaseRecord::single_valued(base, hbar))
        }
        PhaseSpec::PlaneWaveWinding { windings } => PhaseRecord::with_windings(ScalarField::zeros(grid), windings.clone(), hbar),
        PhaseSpec::Sinusoid {
            amplitude,
            turns,
            axis,
            windings,
        } => {
            axis_check(grid, *axis, false)?;
            let windings = if windings.is_empty() { vec![0; dims] } else { windings.clone() };
            let base = ScalarField::from_fn(grid, |x| amplitude * unit_phase(grid, *axis, *turns, x).sin())?;
            PhaseRecord::with_windings(base, windings, hbar)
        }
        PhaseSpec::AngleWinding => {
            let gauge = gauge.ok_or_else(|| Error::InvalidParams("angle-winding phase needs angle fields".into()))?;
            let mut windings = vec![0; dims];
            let mut action = vec![hbar; dims];
            for axis in 0..dims {
                let n = grid.particle_of_axis(axis);
                let nu = gauge.phi()[n].windings()[axis];
                if nu != 0 {
                    windings[axis] = nu;
                    action[axis] = params.eta * params.beta(n);
                }
            }
            let base = ScalarField::from_fn(grid, |_| 0.0)?;
            let base = ScalarField::new(
                grid.clone(),
                (0..grid.len())
                    .map(|p| {
                        // Single-valued part of η Σ β_n φ_n.
                        let phi_bar: f64 = gauge
                            .phi()
                            .iter()
                            .enumerate()
                            .map(|(n, f)| params.beta(n) * f.base().values()[p])
                            .sum();
                        base.values()[p] + params.eta * phi_bar
                    })
                    .collect(),
            )?;
            PhaseRecord::new(base, windings, action, hbar)
        }
    }
}

pub fn build_potential(spec: &PotentialSpec, grid: &Grid, params: &ModelParams) -> Result<Option<ScalarField>> {
    match spec {
        PotentialSpec::Zero => Ok(None),
        PotentialSpec::HarmonicPotential { omega, center } => {
            per_axis(omega, grid, "omega")?;
            per_axis(center, grid, "center")?;
            Ok(Some(ScalarField::from_fn(grid, |x| {
                (0..x.len())
                    .map(|a| {
                        let d = x[a] - center[a];
                        0.5 * params.mass_of_axis(grid, a) * omega[a] * omega[a] * d * d
                    })
                    .sum()
            })?))
        }
        PotentialSpec::Cosine { amplitude, turns, axis } => {
            axis_check(grid, *axis, false)?;
            Ok(Some(ScalarField::from_fn(grid, |x| amplitude * unit_phase(grid, *axis, *turns, x).cos())?))
        }
    }
}

pub fn build_gauge(spec: &GaugeSpec, grid: &Grid) -> Result<Option<GaugeInput>> {
    if spec.angle_windings.is_empty() && spec.connection == ConnectionSpec::Zero {
        return Ok(None);
    }
    let particles = grid.particle_count();
    let phi = if spec.angle_windings.is_empty() {
        (0..particles).map(|_| AngleField::zero(grid)).collect()
    } else {
        if spec.angle_windings.len() != particles {
            return Err(Error::LengthMismatch {
                what: "angle windings",
                expected: particles,
                got: spec.angle_windings.len(),
            });
        }
        spec.angle_windings
            .iter()
            .map(|w| AngleField::winding(grid, w.clone()))
            .collect::<Result<Vec<_>>>()?
    };
    let a = match &spec.connection {
        ConnectionSpec::Zero => VectorField::zeros(grid),
        ConnectionSpec::ConstantA { value } => VectorField::uniform(grid, per_axis(value, grid, "connection")?)?,
    };
    Ok(Some(GaugeInput::new(phi, a)?))
}

/// Smooth random gauge functions. Draw `d` uses `ChaCha8Rng` seeded with
/// `seed` on stream `d + 1`.
pub fn random_chi(grid: &Grid, spec: &ChiSpec, seed: u64) -> Result<Vec<Vec<ScalarField>>> {
    let dims = grid.dims();
    (0..spec.draws)
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d as u64 + 1);
            // (axis, wavenumber, amplitude, phase offset)
            let mut terms = Vec::new();
            for axis in 0..dims {
                for k in 1..=spec.modes {
                    let amp = spec.amplitude * (2.0 * rng.random::<f64>() - 1.0) / k as f64;
                    let offset = 2.0 * PI * rng.random::<f64>();
                    terms.push((axis, k as f64, amp, offset));
                }
            }
            (0..grid.particle_count())
                .map(|n| {
                    let axes = grid.axes_of_particle(n);
                    ScalarField::from_fn(grid, |x| {
                        terms
                            .iter()
                            .filter(|t| axes.contains(&t.0))
                            .map(|&(axis, k, amp, offset)| {
                                // Open axes get half-period modes so χ need not vanish at the ends.
                                let period = if grid.periodic(axis) { grid.extent(axis) } else { 2.0 * grid.extent(axis) };
                                amp * (2.0 * PI * k * (x[axis] - grid.origin(axis)) / period + offset).sin()
                            })
                            .sum()
                    })
                })
                .collect()
        })
        .collect()
}

fn build_params(spec: &ParamSpec, grid: &Grid, issues: &mut Vec<ConfigIssue>) -> Option<ModelParams> {
    let xi = match (spec.xi, spec.hbar) {
        (Some(xi), None) => xi,
        (None, Some(h)) if h >= 0.0 => h * h / 8.0,
        (None, Some(h)) => {
            issues.push(ConfigIssue::error("params.hbar", format!("hbar = {h} must be non-negative")));
            return None;
        }
        _ => {
            issues.push(ConfigIssue::error("params", "give exactly one of `xi` and `hbar`"));
            return None;
        }
    };
    let betas = spec.betas.clone().unwrap_or_else(|| vec![0.0; spec.masses.len()]);
    let params = match ModelParams::new(spec.eta, xi, spec.masses.clone(), betas, spec.c, spec.dt.unwrap_or(1.0)) {
        Ok(p) => p,
        Err(e) => {
            let path = spec
                .masses
                .iter()
                .position(|m| !(*m > 0.0 && m.is_finite()))
                .map_or_else(|| "params".to_string(), |i| format!("params.masses.{i}"));
            issues.push(ConfigIssue::error(&path, e.to_string()));
            return None;
        }
    };
    let params = match spec.hbar {
        Some(h) => params.with_hbar(h),
        None => params,
    };
    if let Err(e) = params.check_grid(grid) {
        issues.push(ConfigIssue::error("params.masses", e.to_string()));
        return None;
    }
    Some(params)
}

/// Full structural and physical validation. Errors and warnings come back
/// together; the setup is returned only when there are no errors.
pub fn validate_scenario(raw: &Value) -> std::result::Result<Setup, Vec<ConfigIssue>> {
    let scenario: Scenario = match serde_json::from_value(raw.clone()) {
        Ok(s) => s,
        Err(e) => return Err(vec![ConfigIssue::error("$", e.to_string())]),
    };
    validate(scenario)
}

pub fn validate(scenario: Scenario) -> std::result::Result<Setup, Vec<ConfigIssue>> {
    let mut issues = Vec::new();
    if scenario.schema != SCHEMA_VERSION {
        issues.push(ConfigIssue::error(
            "schema",
            format!("unsupported schema {}, expected {SCHEMA_VERSION}", scenario.schema),
        ));
    }
    let grid = match scenario.grid.build() {
        Ok(g) => g,
        Err(e) => {
            issues.push(ConfigIssue::error("grid", e.to_string()));
            return Err(issues);
        }
    };
    let Some(mut params) = build_params(&scenario.params, &grid, &mut issues) else {
        return Err(issues);
    };
    let hbar = params.hbar();

    let gauge = build_gauge(&scenario.gauge, &grid).map_err(|e| ConfigIssue::error("gauge", e.to_string()));
    let gauge = match gauge {
        Ok(g) => g,
        Err(i) => {
            issues.push(i);
            None
        }
    };
    let rho0 = match build_density(&scenario.rho, &grid, &params) {
        Ok(r) => Some(r),
        Err(e) => {
            issues.push(ConfigIssue::error("rho", e.to_string()));
            None
        }
    };
    let phase0 = match build_phase(&scenario.phase, &grid, &params, gauge.as_ref()) {
        Ok(p) => Some(p),
        Err(e) => {
            issues.push(ConfigIssue::error("phase", e.to_string()));
            None
        }
    };
    let potential = match build_potential(&scenario.potential, &grid, &params) {
        Ok(v) => v,
        Err(e) => {
            issues.push(ConfigIssue::error("potential", e.to_string()));
            None
        }
    };
    if let Some(s) = &scenario.superposition {
        if let Err(e) = build_phase(&s.partner, &grid, &params, gauge.as_ref()) {
            issues.push(ConfigIssue::error("superposition.partner", e.to_string()));
        }
    }
    if let Some(chi) = &scenario.gauge.chi {
        if chi.draws == 0 || chi.modes == 0 || !(chi.amplitude.is_finite()) {
            issues.push(ConfigIssue::error("gauge.chi", "need draws ≥ 1, modes ≥ 1 and a finite amplitude"));
        }
    }

    if let Some(rho) = &rho0 {
        if let Some(i) = rho.values().iter().position(|&v| v < 0.0) {
            issues.push(ConfigIssue::error("rho", format!("negative density at point {i}")));
        }
        let total = integrate_raw(&grid, rho.values());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            issues.push(ConfigIssue::error(
                "rho",
                format!("initial density integrates to {total}, expected 1 within {NORMALIZATION_TOLERANCE:e}"),
            ));
        }
        let peak = rho.max();
        for axis in (0..grid.dims()).filter(|&a| !grid.periodic(a)) {
            let edge = (0..grid.len())
                .filter(|&p| {
                    let i = grid.index_along(p, axis);
                    i == 0 || i + 1 == grid.points_on(axis)
                })
                .map(|p| rho.values()[p])
                .fold(0.0, f64::max);
            if edge > BOUNDARY_WARNING * peak {
                issues.push(ConfigIssue::warning(
                    "rho",
                    format!("density at the open ends of axis {axis} is {:.3e} of its maximum", edge / peak),
                ));
            }
        }
    }

    if !(scenario.horizon >= 0.0 && scenario.horizon.is_finite()) {
        issues.push(ConfigIssue::error("horizon", "horizon must be finite and non-negative"));
    }
    if scenario.snapshot_every == 0 {
        issues.push(ConfigIssue::error("snapshot_every", "snapshot cadence must be at least 1"));
    }
    let mut solvers = scenario.solvers.clone();
    solvers.sort();
    if solvers.windows(2).any(|w| w[0] == w[1]) {
        issues.push(ConfigIssue::error("solvers", "solvers are listed more than once"));
    }
    if scenario.solvers.contains(&Solver::Walkers) && scenario.walkers < MIN_WALKERS {
        issues.push(ConfigIssue::error(
            "walkers",
            format!("{} walkers requested, at least {MIN_WALKERS} needed", scenario.walkers),
        ));
    }
    if scenario.solvers.contains(&Solver::Schrodinger) {
        if !(hbar > 0.0) {
            issues.push(ConfigIssue::error("solvers", "the Schrodinger solver needs hbar > 0"));
        }
        if let Some(p) = &phase0 {
            if hbar > 0.0 && !p.is_single_valued(QUANTIZATION_TOLERANCE) {
                issues.push(ConfigIssue::error(
                    "phase",
                    "the initial phase is not single-valued in units of 2π hbar, so no wave function exists",
                ));
            }
        }
    }
    if hbar > 0.0 {
        for n in 0..params.particles() {
            let ratio = params.coupling_ratio(n);
            if (ratio - ratio.round()).abs() > QUANTIZATION_TOLERANCE {
                issues.push(ConfigIssue::warning(
                    &format!("params.betas.{n}"),
                    format!("eta*beta/hbar = {ratio} is not an integer; wave functions will not be single-valued"),
                ));
            }
        }
    }

    let mut bound = f64::INFINITY;
    let mut steps = 0;
    if let Some(p) = &phase0 {
        let v = crate::hamiltonian::current_velocity(
            rho0.as_ref().unwrap_or(&ScalarField::zeros(&grid)),
            p,
            gauge.as_ref(),
            &params,
        );
        let max_speed = v.map(|v| v.max_abs()).unwrap_or(0.0);
        bound = stability_bound(&grid, &params, max_speed);
        let needs_steps = scenario.horizon > 0.0 && !scenario.solvers.is_empty();
        let dt = match scenario.params.dt {
            Some(dt) => {
                if !(dt > 0.0) {
                    issues.push(ConfigIssue::error("params.dt", format!("dt = {dt} must be positive")));
                } else if scenario.solvers.iter().any(|s| *s != Solver::Schrodinger) && dt > bound {
                    issues.push(ConfigIssue::error(
                        "params.dt",
                        format!("dt = {dt} exceeds the stability bound {bound:.6e} (C h^2 m / hbar and h / |v|max)"),
                    ));
                }
                dt
            }
            None if bound.is_finite() => SAFETY_FACTOR * bound,
            None if needs_steps => {
                issues.push(ConfigIssue::error(
                    "params.dt",
                    "no stability bound applies (hbar = 0 and v = 0); give dt explicitly",
                ));
                1.0
            }
            None => 1.0,
        };
        if needs_steps && dt > 0.0 {
            steps = (scenario.horizon / dt).ceil().max(1.0) as u64;
            params.dt = scenario.horizon / steps as f64;
        } else if dt > 0.0 {
            params.dt = dt;
        }
    }

    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(issues);
    }
    let (Some(rho0), Some(phase0)) = (rho0, phase0) else {
        return Err(issues);
    };
    Ok(Setup {
        scenario,
        grid,
        params,
        rho0,
        phase0,
        potential,
        gauge,
        steps,
        stability_bound: bound,
        warnings: issues,
    })
}

/// Sets a value by dotted path (`params.dt`, `grid.points.0`). The value is
/// parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(config: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidParams(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = config;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::InvalidParams(format!("`{key}` in `{path}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::InvalidParams(format!("index {idx} in `{path}` is past the end ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::InvalidParams(format!("`{path}` descends into a scalar"))),
        };
    }
    Ok(())
}

pub const PRESETS: [&str; 7] = [
    "free-packet",
    "harmonic-ground",
    "ring-eigenstate",
    "gauged-ring-flux",
    "gauge-invariance-demo",
    "wallstrom-superposition",
    "classical-limit",
];

fn unit_params(hbar: f64, masses: usize, betas: Option<Vec<f64>>) -> ParamSpec {
    ParamSpec {
        eta: 1.0,
        xi: None,
        hbar: Some(hbar),
        masses: vec![1.0; masses],
        betas,
        c: 1.0,
        dt: None,
    }
}

fn line(points: usize, lo: f64, hi: f64) -> GridSpec {
    GridSpec {
        topology: Topology::Line,
        points: vec![points],
        lo: vec![lo],
        hi: vec![hi],
        layout: ParticleLayout::Single,
    }
}

fn ring(points: usize) -> GridSpec {
    GridSpec {
        topology: Topology::Ring,
        points: vec![points],
        lo: vec![0.0],
        hi: vec![2.0 * PI],
        layout: ParticleLayout::Single,
    }
}

/// A named preset. `name` may carry an argument after a colon:
/// `ring-eigenstate:3` (winding), `gauged-ring-flux:0.3` (constant A),
/// `wallstrom-superposition:0.5` (ηβ/ħ).
pub fn preset(name: &str) -> Result<Scenario> {
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => {
            let v: f64 = a
                .parse()
                .map_err(|_| Error::InvalidParams(format!("preset argument `{a}` is not a number")))?;
            (b, Some(v))
        }
        None => (name, None),
    };
    let mut s = Scenario {
        schema: SCHEMA_VERSION,
        name: name.to_string(),
        grid: line(256, -7.0, 7.0),
        params: unit_params(1.0, 1, None),
        rho: DensitySpec::Uniform { scale: 1.0 },
        phase: PhaseSpec::Zero,
        potential: PotentialSpec::Zero,
        gauge: GaugeSpec::default(),
        superposition: None,
        horizon: 1.0,
        snapshot_every: 200,
        walkers: 0,
        seed: 20_240_917,
        solvers: vec![Solver::Fields, Solver::Schrodinger],
        checks: Vec::new(),
    };
    match base {
        "free-packet" => {
            // σ₀ = 1, m = ħ = 1: the horizon 2mσ₀²/ħ doubles σ².
            s.rho = DensitySpec::Gaussian {
                center: vec![0.0],
                width: vec![1.0],
                scale: 1.0,
            };
            s.horizon = 2.0;
            s.walkers = 100_000;
            s.solvers = vec![Solver::Walkers, Solver::Fields, Solver::Schrodinger];
            s.checks = vec![
                Check::DensityL1 { pair: SolverPair::WalkersFields, max: 0.05 },
                Check::DensityL1 { pair: SolverPair::FieldsSchrodinger, max: 1e-3 },
                Check::DensityL1 { pair: SolverPair::WalkersSchrodinger, max: 0.05 },
                Check::PacketWidth { max_relative: 0.01 },
            ];
        }
        "harmonic-ground" => {
            // Past |x| ≈ 5 the density drops under the floor and the tail
            // velocities limit the step.
            s.grid = line(256, -5.0, 5.0);
            s.rho = DensitySpec::HarmonicGround {
                omega: vec![1.0],
                center: vec![0.0],
                scale: 1.0,
            };
            s.potential = PotentialSpec::HarmonicPotential {
                omega: vec![1.0],
                center: vec![0.0],
            };
            s.walkers = 100_000;
            s.solvers = vec![Solver::Walkers, Solver::Fields, Solver::Schrodinger];
            s.checks = vec![
                Check::HamiltonianValue { expected: 0.5, max_relative: 1e-4 },
                Check::Stationarity { max_step_linf: 1e-8 },
                Check::WalkerStationarity { significance: 0.01 },
                Check::DensityL1 { pair: SolverPair::FieldsSchrodinger, max: 1e-3 },
                Check::DensityL1 { pair: SolverPair::WalkersFields, max: 0.05 },
            ];
        }
        "ring-eigenstate" => {
            let m = arg.unwrap_or(1.0);
            if m.fract() != 0.0 {
                return Err(Error::InvalidParams(format!("ring-eigenstate winding {m} is not an integer")));
            }
            s.grid = ring(256);
            s.phase = PhaseSpec::PlaneWaveWinding { windings: vec![m as i64] };
            s.checks = vec![
                Check::Circulation { expected_turns: m, tolerance: 1e-10 },
                Check::HamiltonianValue { expected: 0.5 * m * m, max_relative: 1e-10 },
                Check::HamiltonianDrift { max_relative: 1e-6 },
                Check::NormDrift { max: 1e-8 },
                Check::DensityL1 { pair: SolverPair::FieldsSchrodinger, max: 1e-3 },
            ];
        }
        "gauged-ring-flux" => {
            let a = arg.unwrap_or(0.3);
            s.grid = ring(256);
            s.params = unit_params(1.0, 1, Some(vec![1.0]));
            s.phase = PhaseSpec::PlaneWaveWinding { windings: vec![1] };
            s.gauge.connection = ConnectionSpec::ConstantA { value: vec![a] };
            s.checks = vec![
                Check::Quantization { expect_pass: true },
                Check::Charge { tolerance: 0.0 },
                Check::Circulation { expected_turns: 1.0, tolerance: 1e-10 },
                Check::HamiltonianValue {
                    expected: 0.5 * (1.0 - a) * (1.0 - a),
                    max_relative: 1e-10,
                },
                Check::NormDrift { max: 1e-8 },
                Check::DensityL1 { pair: SolverPair::FieldsSchrodinger, max: 1e-3 },
            ];
        }
        "gauge-invariance-demo" => {
            s.grid = ring(128);
            s.params = unit_params(1.0, 1, Some(vec![1.0]));
            s.rho = DensitySpec::Cosine {
                amplitude: 0.5,
                turns: 1,
                axis: 0,
                scale: 1.0,
            };
            s.phase = PhaseSpec::Sinusoid {
                amplitude: 0.3,
                turns: 2,
                axis: 0,
                windings: vec![1],
            };
            s.potential = PotentialSpec::Cosine {
                amplitude: 0.5,
                turns: 1,
                axis: 0,
            };
            s.gauge.connection = ConnectionSpec::ConstantA { value: vec![0.2] };
            s.gauge.chi = Some(ChiSpec {
                draws: 20,
                modes: 3,
                amplitude: 1.0,
            });
            s.horizon = 0.5;
            s.checks = vec![
                Check::GaugeInvariance {
                    max_rho_linf: 1e-8,
                    max_velocity: 1e-10,
                },
                Check::HamiltonianDrift { max_relative: 1e-6 },
                Check::NormDrift { max: 1e-8 },
            ];
        }
        "wallstrom-superposition" => {
            let ratio = arg.unwrap_or(0.5);
            // An odd point count keeps grid points off θ = π, where the
            // integer-ratio superposition has a node.
            s.grid = ring(63);
            s.params = unit_params(1.0, 1, Some(vec![ratio]));
            s.gauge.angle_windings = vec![vec![1]];
            s.phase = PhaseSpec::AngleWinding;
            let c = std::f64::consts::FRAC_1_SQRT_2;
            s.superposition = Some(SuperpositionSpec {
                partner: PhaseSpec::Zero,
                coefficients: [[c, 0.0], [c, 0.0]],
            });
            s.horizon = 0.0;
            s.solvers = Vec::new();
            let integer = ratio.fract() == 0.0;
            s.checks = vec![
                Check::Quantization { expect_pass: integer },
                Check::ClosureJump {
                    expected: 1.0 - (2.0 * PI * ratio).cos(),
                    tolerance: if integer { 1e-10 } else { 1e-6 },
                },
                Check::Charge { tolerance: 0.0 },
                Check::Linearity { max: 1e-10 },
            ];
        }
        "classical-limit" => {
            s.params = unit_params(0.0, 1, None);
            s.rho = DensitySpec::Gaussian {
                center: vec![-1.0],
                width: vec![1.0],
                scale: 1.0,
            };
            s.phase = PhaseSpec::Linear { momentum: vec![1.0] };
            s.horizon = 2.0;
            s.snapshot_every = 10;
            s.walkers = 100_000;
            s.solvers = vec![Solver::Walkers, Solver::Fields];
            s.checks = vec![
                Check::ClassicalLimit,
                Check::DensityL1 { pair: SolverPair::WalkersFields, max: 0.05 },
            ];
        }
        other => {
            return Err(Error::InvalidParams(format!(
                "unknown preset `{other}`; known: {}",
                PRESETS.join(", ")
            )))
        }
    }
    if arg.is_some() && !matches!(base, "ring-eigenstate" | "gauged-ring-flux" | "wallstrom-superposition") {
        return Err(Error::InvalidParams(format!("preset `{base}` takes no argument")));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(name: &str) -> Value {
        serde_json::to_value(preset(name).unwrap()).unwrap()
    }

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let setup = validate_scenario(&raw(name)).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            assert!(setup.steps > 0 || setup.scenario.solvers.is_empty(), "{name}");
        }
    }

    #[test]
    fn free_packet_reference_step() {
        let setup = validate_scenario(&raw("free-packet")).unwrap();
        let h = 14.0 / 255.0;
        assert!((setup.stability_bound - h * h).abs() < 1e-15);
        assert_eq!(setup.steps, 1328);
        assert!(setup.warnings.is_empty());
    }

    #[test]
    fn unstable_dt_names_the_bound() {
        let mut v = raw("free-packet");
        apply_override(&mut v, "params.dt=0.01").unwrap();
        let issues = validate_scenario(&v).unwrap_err();
        assert!(issues.iter().any(|i| i.path == "params.dt" && i.message.contains("stability bound")));
    }

    #[test]
    fn half_normalized_density_is_rejected() {
        let mut v = raw("free-packet");
        apply_override(&mut v, "rho.scale=0.5").unwrap();
        let issues = validate_scenario(&v).unwrap_err();
        assert!(issues.iter().any(|i| i.path == "rho" && i.message.contains("integrates to 0.49") || i.message.contains("integrates to 0.5")));
    }

    #[test]
    fn fractional_coupling_warns() {
        let setup = validate_scenario(&raw("wallstrom-superposition:0.25")).unwrap();
        assert!(setup.warnings.iter().any(|w| w.severity == Severity::Warning && w.path == "params.betas.0"));
    }

    #[test]
    fn overrides_reach_nested_values() {
        let mut v = raw("ring-eigenstate");
        apply_override(&mut v, "grid.points.0=64").unwrap();
        apply_override(&mut v, "solvers=[\"fields\"]").unwrap();
        apply_override(&mut v, "name=renamed").unwrap();
        let s: Scenario = serde_json::from_value(v.clone()).unwrap();
        assert_eq!((s.grid.points[0], s.solvers.clone(), s.name.as_str()), (64, vec![Solver::Fields], "renamed"));
        assert!(apply_override(&mut v, "grid.points.9=1").is_err());
        assert!(apply_override(&mut v, "nonsense").is_err());
    }

    #[test]
    fn unknown_fields_and_presets_are_rejected() {
        let mut v = raw("free-packet");
        apply_override(&mut v, "bogus=1").unwrap();
        assert!(validate_scenario(&v).is_err());
        assert!(preset("no-such-thing").is_err());
        assert!(preset("free-packet:2").is_err());
    }

    #[test]
    fn angle_winding_phase_carries_eta_beta() {
        let setup = validate_scenario(&raw("wallstrom-superposition:0.5")).unwrap();
        assert_eq!(setup.phase0.windings(), &[1]);
        assert!((setup.phase0.turns_in_hbar(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_draws_are_reproducible_and_distinct() {
        let setup = validate_scenario(&raw("gauge-invariance-demo")).unwrap();
        let a = setup.chi_draws().unwrap();
        let b = setup.chi_draws().unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a[3][0], b[3][0]);
        assert_ne!(a[3][0], a[4][0]);
    }
}
