//! Loop diagnostics: circulation of `Φ`, winding numbers of `Ψ`, the charge
//! quantization criterion, and loop-closure tests of superpositions.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::interpolate;
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::phase::PhaseRecord;
use crate::schrodinger::NODE_FLOOR;

/// Default tolerance on `|ηβ/ħ − μ|`.
pub const QUANTIZATION_TOLERANCE: f64 = 1e-9;

/// Winding residuals above this mean the phase is sampled too coarsely.
pub const MAX_WINDING_RESIDUAL: f64 = 0.1;

/// One edge of a loop: the axis it runs along and its direction (±1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LoopEdge {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    pub direction: i8,
}

/// A closed path along grid edges in which only one particle moves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopPath {
    #[serde(skip)]
    grid: Grid,
    points: Vec<usize>,
    particle: usize,
    edges: Vec<LoopEdge>,
}

impl LoopPath {
    /// `points` must start and end at the same grid point, and every
    /// consecutive pair must be neighbours along an axis of `particle`.
    pub fn new(grid: &Grid, points: Vec<usize>, particle: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidLoop("a loop needs at least one edge".into()));
        }
        if points.first() != points.last() {
            return Err(Error::InvalidLoop(format!(
                "loop is not closed: starts at {} and ends at {}",
                points[0],
                points[points.len() - 1]
            )));
        }
        if particle >= grid.particle_count() {
            return Err(Error::InvalidLoop(format!("no particle {particle}")));
        }
        if let Some(&p) = points.iter().find(|&&p| p >= grid.len()) {
            return Err(Error::InvalidLoop(format!("point {p} is outside the grid")));
        }
        let axes = grid.axes_of_particle(particle);
        let mut edges = Vec::with_capacity(points.len() - 1);
        for (k, w) in points.windows(2).enumerate() {
            let (from, to) = (w[0], w[1]);
            let edge = axes.iter().find_map(|&axis| {
                [1i8, -1].into_iter().find_map(|dir| {
                    (grid.neighbor(from, axis, dir as isize) == Some(to)).then_some(LoopEdge {
                        from,
                        to,
                        axis,
                        direction: dir,
                    })
                })
            });
            match edge {
                Some(e) => edges.push(e),
                None => {
                    return Err(Error::InvalidLoop(format!(
                        "step {k} from {from} to {to} is not a grid edge of particle {particle}"
                    )))
                }
            }
        }
        Ok(Self {
            grid: grid.clone(),
            points,
            particle,
            edges,
        })
    }

    /// Once around periodic `axis` in the positive direction, from `start`.
    pub fn around_axis(grid: &Grid, axis: usize, start: usize) -> Result<Self> {
        if axis >= grid.dims() || !grid.periodic(axis) {
            return Err(Error::InvalidLoop(format!("axis {axis} is not periodic")));
        }
        let mut points = vec![start];
        let mut p = start;
        for _ in 0..grid.points_on(axis) {
            p = grid.neighbor(p, axis, 1).expect("periodic axis");
            points.push(p);
        }
        Self::new(grid, points, grid.particle_of_axis(axis))
    }

    /// Counter-clockwise rectangle with lower-left corner `corner` spanning
    /// `size` edges along each axis of a two-dimensional grid.
    pub fn rectangle(grid: &Grid, corner: [usize; 2], size: [usize; 2]) -> Result<Self> {
        if grid.dims() != 2 {
            return Err(Error::InvalidLoop("rectangles need a two-dimensional grid".into()));
        }
        if size[0] == 0 || size[1] == 0 {
            return Err(Error::InvalidLoop("rectangle sides must be positive".into()));
        }
        let mut points = vec![grid.flat_index(&corner)];
        let moves = [(0, 1isize, size[0]), (1, 1, size[1]), (0, -1, size[0]), (1, -1, size[1])];
        for (axis, dir, count) in moves {
            for _ in 0..count {
                let p = *points.last().expect("non-empty");
                let q = grid
                    .neighbor(p, axis, dir)
                    .ok_or_else(|| Error::InvalidLoop("rectangle leaves the grid".into()))?;
                points.push(q);
            }
        }
        let particle = grid.particle_of_axis(0);
        Self::new(grid, points, particle)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn particle(&self) -> usize {
        self.particle
    }

    pub fn edges(&self) -> &[LoopEdge] {
        &self.edges
    }

    /// Net number of times the loop goes around each axis.
    pub fn turns(&self) -> Vec<i64> {
        let mut steps = vec![0i64; self.grid.dims()];
        for e in &self.edges {
            steps[e.axis] += e.direction as i64;
        }
        steps
            .iter()
            .enumerate()
            .map(|(a, &s)| s / self.grid.points_on(a) as i64)
            .collect()
    }
}

/// Loop description for the command line.
///
/// * `axis:A` goes once around periodic axis `A` from the origin;
/// * `axis:A@I,J` starts at multi-index `(I, J)`;
/// * `rect:I,J,W,H` is a rectangle on a two-dimensional grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoopSpec {
    Axis { axis: usize, start: Vec<usize> },
    Rectangle { corner: [usize; 2], size: [usize; 2] },
}

impl LoopSpec {
    pub fn build(&self, grid: &Grid) -> Result<LoopPath> {
        match self {
            LoopSpec::Axis { axis, start } => {
                let start = if start.is_empty() {
                    0
                } else if start.len() == grid.dims() && start.iter().enumerate().all(|(a, &i)| i < grid.points_on(a)) {
                    grid.flat_index(start)
                } else {
                    return Err(Error::InvalidLoop(format!("bad start index {start:?}")));
                };
                LoopPath::around_axis(grid, *axis, start)
            }
            LoopSpec::Rectangle { corner, size } => LoopPath::rectangle(grid, *corner, *size),
        }
    }
}

impl FromStr for LoopSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidLoop(format!("cannot parse loop spec `{s}`"));
        let nums = |t: &str| -> Result<Vec<usize>> {
            t.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
        };
        if let Some(rest) = s.strip_prefix("axis:") {
            let (axis, start) = match rest.split_once('@') {
                Some((a, st)) => (a, nums(st)?),
                None => (rest, Vec::new()),
            };
            Ok(LoopSpec::Axis {
                axis: axis.trim().parse().map_err(|_| bad())?,
                start,
            })
        } else if let Some(rest) = s.strip_prefix("rect:") {
            match nums(rest)?.as_slice() {
                &[i, j, w, h] => Ok(LoopSpec::Rectangle {
                    corner: [i, j],
                    size: [w, h],
                }),
                _ => Err(bad()),
            }
        } else {
            Err(bad())
        }
    }
}

/// `ΔΦ/ħ` around the loop: the discrete line integral of the base gradient
/// along loop edges plus the winding slopes.
pub fn circulation(phase: &PhaseRecord, path: &LoopPath, params: &ModelParams) -> Result<f64> {
    if phase.grid() != path.grid() {
        return Err(Error::GridMismatch);
    }
    let hbar = params.hbar();
    if !(hbar > 0.0) {
        return Err(Error::InvalidParams("circulation in units of hbar needs hbar > 0".into()));
    }
    let base = phase.base().values();
    let grid = path.grid();
    let mut total = 0.0;
    for e in path.edges() {
        total += base[e.to] - base[e.from];
        total += phase.winding_slope(e.axis) * e.direction as f64 * grid.spacing(e.axis);
    }
    Ok(total / hbar)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindingCount {
    pub winding: i64,
    /// Distance of the accumulated turns from the nearest integer.
    pub residual: f64,
}

/// Sum of principal-branch phase steps around the loop, in turns.
pub fn winding_number(psi: &ComplexField, path: &LoopPath) -> Result<WindingCount> {
    if psi.grid() != path.grid() {
        return Err(Error::GridMismatch);
    }
    let values = psi.values();
    let floor = NODE_FLOOR * values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if let Some(&index) = path.points().iter().find(|&&p| !(values[p].norm_sqr() >= floor && values[p].norm_sqr() > 0.0)) {
        return Err(Error::Node {
            index,
            density: values[index].norm_sqr(),
        });
    }
    let total: f64 = path
        .edges()
        .iter()
        .map(|e| (values[e.to] * values[e.from].conj()).arg())
        .sum();
    let turns = total / (2.0 * PI);
    let residual = (turns - turns.round()).abs();
    if residual > MAX_WINDING_RESIDUAL {
        return Err(Error::CoarsePhase { residual });
    }
    Ok(WindingCount {
        winding: turns.round() as i64,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantizationVerdict {
    pub particle: usize,
    /// `ηβ_n/ħ`.
    pub ratio: f64,
    pub mu: i64,
    pub deviation: f64,
    pub pass: bool,
    pub tolerance: f64,
}

/// Checks `ηβ_n/ħ ∈ ℤ` for every particle.
pub fn quantization_check(params: &ModelParams, tolerance: f64) -> Result<Vec<QuantizationVerdict>> {
    let hbar = params.hbar();
    if !(hbar > 0.0) {
        return Err(Error::InvalidParams("quantization needs hbar > 0".into()));
    }
    Ok((0..params.particles())
        .map(|n| {
            let ratio = params.eta * params.beta(n) / hbar;
            let mu = ratio.round();
            let deviation = (ratio - mu).abs();
            QuantizationVerdict {
                particle: n,
                ratio,
                mu: mu as i64,
                deviation,
                pass: deviation <= tolerance,
                tolerance,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChargeReport {
    pub particle: usize,
    /// `q_n = c η β_n`.
    pub charge: f64,
    /// `ħ c`.
    pub basic_charge: f64,
    /// `q_n / (ħ c)`.
    pub ratio: f64,
    /// Set when the ratio is an integer within [`QUANTIZATION_TOLERANCE`].
    pub mu: Option<i64>,
}

pub fn charge_from_multiplier(params: &ModelParams, particle: usize) -> Result<ChargeReport> {
    if particle >= params.particles() {
        return Err(Error::InvalidParams(format!("no particle {particle}")));
    }
    let charge = params.c * params.eta * params.beta(particle);
    let basic_charge = params.hbar() * params.c;
    let ratio = if basic_charge > 0.0 { charge / basic_charge } else { f64::NAN };
    let mu = (ratio.is_finite() && (ratio - ratio.round()).abs() <= QUANTIZATION_TOLERANCE).then(|| ratio.round() as i64);
    Ok(ChargeReport {
        particle,
        charge,
        basic_charge,
        ratio,
        mu,
    })
}

/// The multiplier that carries charge `q`: `β = q / (c η)`.
pub fn multiplier_from_charge(params: &ModelParams, charge: f64) -> f64 {
    charge / (params.c * params.eta)
}

/// `q' = λq`, `A' = A/λ`.
pub fn rescale_units(charge: f64, potential: &VectorField, lambda: f64) -> Result<(f64, VectorField)> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::ZeroRescale);
    }
    let a = potential.values().iter().map(|v| v / lambda).collect();
    Ok((lambda * charge, VectorField::new(potential.grid().clone(), a)?))
}

/// `a1 ψ1 + a2 ψ2`.
pub fn superpose(psi1: &ComplexField, psi2: &ComplexField, a1: Complex64, a2: Complex64) -> Result<ComplexField> {
    if psi1.grid() != psi2.grid() {
        return Err(Error::GridMismatch);
    }
    let values = psi1
        .values()
        .iter()
        .zip(psi2.values())
        .map(|(u, v)| a1 * u + a2 * v)
        .collect();
    ComplexField::new(psi1.grid().clone(), values)
}

/// A wave function that can be evaluated at unwrapped coordinates, so that
/// going once around a periodic axis continues the phase instead of
/// reading it back from the grid.
pub trait ContinuedWave {
    fn value(&self, x: &[f64]) -> Complex64;
}

/// `amplitude · exp(i 2π Σ_a turns_a (x_a − x0_a) / L_a)` with real-valued
/// turns; non-integer turns give a multi-valued function.
#[derive(Clone, Debug, PartialEq)]
pub struct WindingWave {
    pub amplitude: Complex64,
    pub turns: Vec<f64>,
    pub origin: Vec<f64>,
    pub period: Vec<f64>,
}

impl WindingWave {
    pub fn on_grid(grid: &Grid, amplitude: Complex64, turns: Vec<f64>) -> Result<Self> {
        if turns.len() != grid.dims() {
            return Err(Error::LengthMismatch {
                what: "turns",
                expected: grid.dims(),
                got: turns.len(),
            });
        }
        Ok(Self {
            amplitude,
            turns,
            origin: grid.origins().to_vec(),
            period: (0..grid.dims()).map(|a| grid.extent(a)).collect(),
        })
    }
}

impl ContinuedWave for WindingWave {
    fn value(&self, x: &[f64]) -> Complex64 {
        let theta: f64 = (0..self.turns.len())
            .map(|a| 2.0 * PI * self.turns[a] * (x[a] - self.origin[a]) / self.period[a])
            .sum();
        self.amplitude * Complex64::from_polar(1.0, theta)
    }
}

/// `√ρ exp(iΦ/ħ)` with the winding ramps of `Φ` continued along the path.
#[derive(Clone, Debug)]
pub struct MadelungWave {
    pub rho: ScalarField,
    pub phase: PhaseRecord,
    pub hbar: f64,
}

impl ContinuedWave for MadelungWave {
    fn value(&self, x: &[f64]) -> Complex64 {
        let grid = self.rho.grid();
        let rho = interpolate(&self.rho, x).unwrap_or(0.0).max(0.0);
        let base = interpolate(self.phase.base(), x).unwrap_or(0.0);
        let ramp: f64 = (0..grid.dims())
            .map(|a| self.phase.winding_slope(a) * (x[a] - grid.origin(a)))
            .sum();
        Complex64::from_polar(rho.sqrt(), (base + ramp) / self.hbar)
    }
}

/// `Σ_k a_k ψ_k` of continued waves.
#[derive(Default)]
pub struct Superposition {
    terms: Vec<(Complex64, Box<dyn ContinuedWave>)>,
}

impl Superposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, coefficient: Complex64, wave: impl ContinuedWave + 'static) -> Self {
        self.terms.push((coefficient, Box::new(wave)));
        self
    }
}

impl ContinuedWave for Superposition {
    fn value(&self, x: &[f64]) -> Complex64 {
        self.terms.iter().map(|(a, w)| a * w.value(x)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosureMismatch {
    /// `| |Ψ_end|² − |Ψ_start|² |`.
    pub jump_rho: f64,
    /// `|Ψ_end − Ψ_start|`.
    pub jump_psi: f64,
}

/// Transports `wave` once around `path` by continuous coordinates and
/// compares the value at the end with the value at the start.
///
/// Interior points of the path must stay above the node floor relative to
/// the largest `|Ψ|²` seen; the end point may not, since that is exactly
/// where a multi-valued superposition can vanish.
pub fn loop_closure_mismatch(wave: &dyn ContinuedWave, path: &LoopPath) -> Result<ClosureMismatch> {
    let grid = path.grid();
    let mut x = grid.coords(path.points()[0]);
    let mut samples = Vec::with_capacity(path.points().len());
    samples.push(wave.value(&x));
    for e in path.edges() {
        x[e.axis] += e.direction as f64 * grid.spacing(e.axis);
        samples.push(wave.value(&x));
    }
    let peak = samples.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let n = samples.len();
    if let Some(k) = (1..n - 1).find(|&k| !(samples[k].norm_sqr() > NODE_FLOOR * peak)) {
        return Err(Error::Node {
            index: path.points()[k],
            density: samples[k].norm_sqr(),
        });
    }
    let (start, end) = (samples[0], samples[n - 1]);
    Ok(ClosureMismatch {
        jump_rho: (end.norm_sqr() - start.norm_sqr()).abs(),
        jump_psi: (end - start).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schrodinger::madelung_decompose;

    fn ring() -> Grid {
        Grid::ring(64, 0.0, 2.0 * PI).unwrap()
    }

    fn params() -> ModelParams {
        ModelParams::single(1.0, 1.0, 0.01).unwrap()
    }

    #[test]
    fn loop_validation() {
        let grid = ring();
        assert!(matches!(LoopPath::new(&grid, vec![0, 1, 2], 0), Err(Error::InvalidLoop(_))));
        assert!(matches!(LoopPath::new(&grid, vec![0, 2, 0], 0), Err(Error::InvalidLoop(_))));
        let back = LoopPath::new(&grid, vec![0, 1, 0], 0).unwrap();
        assert_eq!(back.turns(), vec![0]);
        assert_eq!(LoopPath::around_axis(&grid, 0, 5).unwrap().turns(), vec![1]);
    }

    #[test]
    fn loop_specs_parse() {
        assert_eq!(
            "axis:1@2,3".parse::<LoopSpec>().unwrap(),
            LoopSpec::Axis { axis: 1, start: vec![2, 3] }
        );
        assert_eq!(
            "rect:1,2,3,4".parse::<LoopSpec>().unwrap(),
            LoopSpec::Rectangle { corner: [1, 2], size: [3, 4] }
        );
        assert!("circle".parse::<LoopSpec>().is_err());
    }

    #[test]
    fn circulation_examples() {
        let grid = ring();
        let path = LoopPath::around_axis(&grid, 0, 0).unwrap();
        let flat = PhaseRecord::single_valued(ScalarField::constant(&grid, 2.0), 1.0);
        assert_eq!(circulation(&flat, &path, &params()).unwrap(), 0.0);
        let wound = PhaseRecord::with_windings(ScalarField::zeros(&grid), vec![3], 1.0).unwrap();
        assert!((circulation(&wound, &path, &params()).unwrap() - 6.0 * PI).abs() < 1e-10);
        let half = PhaseRecord::new(ScalarField::zeros(&grid), vec![1], vec![0.5], 1.0).unwrap();
        assert!((circulation(&half, &path, &params()).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn winding_examples_and_additivity() {
        let grid = ring();
        let path = LoopPath::around_axis(&grid, 0, 0).unwrap();
        let wave = |m: f64| ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, m * x[0])).unwrap();
        assert_eq!(winding_number(&wave(0.0), &path).unwrap().winding, 0);
        assert_eq!(winding_number(&wave(3.0), &path).unwrap().winding, 3);
        assert_eq!(winding_number(&wave(-1.0), &path).unwrap().winding, -1);
        let product: Vec<Complex64> = wave(3.0).values().iter().zip(wave(-1.0).values()).map(|(a, b)| a * b).collect();
        let product = ComplexField::new(grid.clone(), product).unwrap();
        assert_eq!(winding_number(&product, &path).unwrap().winding, 2);
        let (_, phase) = madelung_decompose(&wave(-2.0), &params()).unwrap();
        assert!((circulation(&phase, &path, &params()).unwrap() / (2.0 * PI) + 2.0).abs() < 1e-10);
    }

    #[test]
    fn quantization_examples() {
        let p = params().with_betas(vec![2.0]);
        let v = quantization_check(&p, QUANTIZATION_TOLERANCE).unwrap()[0];
        assert!(v.pass && v.mu == 2 && v.deviation == 0.0);
        let v = quantization_check(&params().with_betas(vec![0.5]), QUANTIZATION_TOLERANCE).unwrap()[0];
        assert!(!v.pass && v.deviation == 0.5);
        let v = quantization_check(&params().with_betas(vec![3.0 + 1e-12]), QUANTIZATION_TOLERANCE).unwrap()[0];
        assert!(v.pass && v.mu == 3);
    }

    #[test]
    fn charge_and_rescale() {
        assert_eq!(charge_from_multiplier(&params(), 0).unwrap().charge, 0.0);
        let q = charge_from_multiplier(&params().with_betas(vec![3.0]), 0).unwrap();
        assert_eq!((q.charge, q.mu), (3.0, Some(3)));
        let q = charge_from_multiplier(&params().with_betas(vec![1.0]), 0).unwrap();
        assert_eq!(q.charge, q.basic_charge);
        let grid = ring();
        let a = VectorField::uniform(&grid, &[3.0]).unwrap();
        let (q2, a2) = rescale_units(2.0, &a, 5.0).unwrap();
        assert_eq!(q2, 10.0);
        assert!((a2.values()[0] - 0.6).abs() < 1e-15);
        assert!(matches!(rescale_units(2.0, &a, 0.0), Err(Error::ZeroRescale)));
    }

    #[test]
    fn closure_of_half_and_whole_windings() {
        // An odd point count keeps the loop off the node of (e^{iθ} + 1) at θ = π.
        let grid = Grid::ring(63, 0.0, 2.0 * PI).unwrap();
        let path = LoopPath::around_axis(&grid, 0, 0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let one = Complex64::new(s, 0.0);
        let half = Superposition::new()
            .with(one, WindingWave::on_grid(&grid, Complex64::new(1.0, 0.0), vec![0.5]).unwrap())
            .with(one, WindingWave::on_grid(&grid, Complex64::new(1.0, 0.0), vec![0.0]).unwrap());
        let m = loop_closure_mismatch(&half, &path).unwrap();
        assert!((m.jump_rho - 2.0).abs() < 1e-12);
        let whole = Superposition::new()
            .with(one, WindingWave::on_grid(&grid, Complex64::new(1.0, 0.0), vec![1.0]).unwrap())
            .with(one, WindingWave::on_grid(&grid, Complex64::new(1.0, 0.0), vec![0.0]).unwrap());
        assert!(loop_closure_mismatch(&whole, &path).unwrap().jump_rho <= 1e-12);
    }

    #[test]
    fn superpose_examples() {
        let grid = ring();
        let psi = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, x[0])).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        assert_eq!(superpose(&psi, &psi, two, zero).unwrap(), psi.scale(two));
        let neg = psi.scale(Complex64::new(-1.0, 0.0));
        let one = Complex64::new(1.0, 0.0);
        assert!(superpose(&psi, &neg, one, one).unwrap().values().iter().all(|z| z.norm() == 0.0));
    }
}
